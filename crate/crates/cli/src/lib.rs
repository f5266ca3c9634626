//! Library side of the `arma-el` command-line tool: CSV ingestion, the
//! shared-fit test runner and report rendering.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use arma_el::classic::{portmanteau, residual_acf, rw_bootstrap_test, PortmanteauKind};
use arma_el::el::{profile_el_test, ElMode};
use arma_el::estimation::{ls_fit, residuals};
use arma_el::model::TimeSeries;
use clap::ValueEnum;
use serde::Serialize;

pub const MIN_ROWS: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Precondition(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("fit failed: {0}")]
    Fit(arma_el::Error),
    #[error(transparent)]
    Core(#[from] arma_el::Error),
}

impl CliError {
    /// Process exit code: 2 for fit failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Fit(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn precondition(msg: impl Into<String>) -> CliError {
    CliError::Precondition(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    #[value(name = "log_return", alias = "log-return")]
    LogReturn,
}

/// Column chosen by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

/// Parse one numeric column out of CSV text. Without a selector the last
/// column is used. A first row with any non-numeric field is a header.
pub fn parse_series(text: &str, column: Option<&ColumnSelector>, transform: Transform) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let Some(first) = records.first() else {
        return Err(precondition("input has no rows"));
    };
    let has_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let index = match column {
        Some(ColumnSelector::Index(i)) => *i,
        Some(ColumnSelector::Name(name)) => {
            if !has_header {
                return Err(precondition(format!("column \"{name}\" requested but the input has no header")));
            }
            first
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| precondition(format!("column \"{name}\" not found")))?
        }
        None => first.len().saturating_sub(1),
    };
    let skip = usize::from(has_header);
    let mut values = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate().skip(skip) {
        let row = i + 1;
        let cell = record
            .get(index)
            .ok_or_else(|| CliError::Row { row, msg: format!("missing column {index}") })?;
        let v: f64 = cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::Row { row, msg: format!("non-numeric value \"{cell}\"") })?;
        values.push((row, v));
    }
    match transform {
        Transform::None => Ok(values.into_iter().map(|(_, v)| v).collect()),
        Transform::LogReturn => {
            if let Some((row, v)) = values.iter().find(|(_, v)| *v <= 0.0) {
                return Err(CliError::Row { row: *row, msg: format!("nonpositive price {v} under log_return") });
            }
            Ok(values.windows(2).map(|w| (w[1].1 / w[0].1).ln()).collect())
        }
    }
}

/// Read a series from a CSV file, or standard input when `path` is `-`.
pub fn ingest_csv(path: &Path, column: Option<&ColumnSelector>, transform: Transform) -> Result<TimeSeries> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path)?
    };
    let values = parse_series(&text, column, transform)?;
    if values.len() < MIN_ROWS {
        return Err(precondition(format!("need at least {MIN_ROWS} observations, got {}", values.len())));
    }
    Ok(TimeSeries::new(values)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Bp,
    Lb,
    Rw,
    El,
    Wel,
}

impl TestKind {
    pub fn label(self) -> &'static str {
        match self {
            TestKind::Bp => "bp",
            TestKind::Lb => "lb",
            TestKind::Rw => "rw",
            TestKind::El => "el",
            TestKind::Wel => "wel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub tests: Vec<TestKind>,
    pub seed: u64,
    pub rw_b: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tests.is_empty() {
            return Err(precondition("select at least one test"));
        }
        if self.m == 0 {
            return Err(precondition("m must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesInfo {
    pub n: usize,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitInfo {
    /// `(μ, φ_1..φ_p, ψ_1..ψ_q)`.
    pub theta: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestEntry {
    pub name: String,
    pub m: usize,
    pub stat: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub series: SeriesInfo,
    pub fit: FitInfo,
    pub tests: Vec<TestEntry>,
}

/// Round to 12 significant digits, the precision of every rendered number.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Fit ARMA(p, q) once and evaluate each selected test on that fit. A failing
/// test is reported with its error; only a failed fit aborts.
pub fn run_tests(cfg: &RunConfig, series: &TimeSeries, transform: Transform) -> Result<Report> {
    cfg.validate()?;
    let x = series.values();
    let fit = ls_fit(x, cfg.p, cfg.q, None).map_err(CliError::Fit)?;
    let eps = residuals(&fit.theta_hat, x);
    let mut tests = Vec::with_capacity(cfg.tests.len());
    for &kind in &cfg.tests {
        let outcome: std::result::Result<(f64, f64), arma_el::Error> = match kind {
            TestKind::Bp | TestKind::Lb => {
                let which = if kind == TestKind::Bp { PortmanteauKind::BoxPierce } else { PortmanteauKind::LjungBox };
                residual_acf(&eps, cfg.m).and_then(|acf| portmanteau(&acf, which)).map(|r| (r.stat, r.p_value))
            }
            TestKind::Rw => rw_bootstrap_test(x, &fit, cfg.m, cfg.rw_b, cfg.seed).map(|r| (r.stat, r.p_value)),
            TestKind::El | TestKind::Wel => {
                let mode = if kind == TestKind::El { ElMode::El } else { ElMode::Wel };
                profile_el_test(x, cfg.p, cfg.q, cfg.m, mode, Some(&fit)).map(|o| (o.stat, o.p_value))
            }
        };
        tests.push(match outcome {
            Ok((stat, p)) => TestEntry {
                name: kind.label().to_string(),
                m: cfg.m,
                stat: Some(round12(stat)),
                p_value: Some(round12(p)),
                stars: stars(p).to_string(),
                error: None,
            },
            Err(e) => TestEntry {
                name: kind.label().to_string(),
                m: cfg.m,
                stat: None,
                p_value: None,
                stars: String::new(),
                error: Some(e.to_string()),
            },
        });
    }
    Ok(Report {
        series: SeriesInfo { n: x.len(), transform },
        fit: FitInfo { theta: fit.theta_hat.to_vec().into_iter().map(round12).collect(), converged: fit.converged },
        tests,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn render(report: &Report, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| precondition(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["name", "m", "stat", "p_value", "stars", "error"])?;
            for t in &report.tests {
                w.write_record([
                    t.name.clone(),
                    t.m.to_string(),
                    opt(t.stat),
                    opt(t.p_value),
                    t.stars.clone(),
                    t.error.clone().unwrap_or_default(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| precondition(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| precondition(e.to_string()))
        }
        OutputFormat::Text => {
            let mut s = String::new();
            let transform = match report.series.transform {
                Transform::None => "none",
                Transform::LogReturn => "log_return",
            };
            let _ = writeln!(s, "series: n = {}, transform = {transform}", report.series.n);
            let theta: Vec<String> = report.fit.theta.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "fit: theta = [{}], converged = {}", theta.join(", "), report.fit.converged);
            let _ = writeln!(s, "{:<5} {:>3} {:>20} {:>20}", "test", "m", "stat", "p_value");
            for t in &report.tests {
                match &t.error {
                    None => {
                        let _ = writeln!(s, "{:<5} {:>3} {:>20} {:>20} {}", t.name, t.m, opt(t.stat), opt(t.p_value), t.stars);
                    }
                    Some(e) => {
                        let _ = writeln!(s, "{:<5} {:>3} failed: {e}", t.name, t.m);
                    }
                }
            }
            let _ = writeln!(s, "* p<0.1, ** p<0.05, *** p<0.01");
            Ok(s)
        }
    }
}
