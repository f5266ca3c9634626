//! Monte Carlo size/power experiments over a grid of (μ, n, c).
//!
//! Every replication draws its own seeds from `(root_seed, cell, replication,
//! purpose)`, so results do not depend on how replications are scheduled.
//! Fit failures are dropped from a cell's denominator; a method that fails on
//! a fitted series counts as a non-rejection and is tallied in `failures`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::rw_bootstrap_test;
use crate::el::{profile_el_test, ElMode};
use crate::estimation::ls_fit;
use crate::model::{simulate, ArmaSpec, DgpConfig, GarchSpec, DEFAULT_BURN_IN};
use crate::stats_util::SeedPath;
use crate::{Error, Result};

const PURPOSE_SIMULATE: u64 = 0;
const PURPOSE_BOOTSTRAP: u64 = 1;

/// Rows flagged when more than this fraction of replications failed.
pub const FAILURE_FLAG_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rw,
    El,
    Wel,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rw => "rw",
            Method::El => "el",
            Method::Wel => "wel",
        }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_bootstrap() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub arma: ArmaSpec,
    pub garch: GarchSpec,
    pub mus: Vec<f64>,
    pub ns: Vec<usize>,
    pub cs: Vec<f64>,
    pub m: usize,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_b: usize,
    pub root_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.arma.validate()?;
        self.garch.validate()?;
        if self.reps < 100 {
            return Err(Error::domain(format!("reps must be >= 100, got {}", self.reps)));
        }
        if self.m == 0 {
            return Err(Error::domain("m must be >= 1"));
        }
        if self.mus.is_empty() || self.ns.is_empty() || self.cs.is_empty() {
            return Err(Error::domain("grid lists must be nonempty"));
        }
        if self.mus.iter().chain(&self.cs).any(|v| !v.is_finite()) {
            return Err(Error::domain("grid values must be finite"));
        }
        if self.ns.iter().any(|n| *n < 50) {
            return Err(Error::domain("sample sizes must be >= 50"));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::domain("levels must be nonempty and lie in (0, 1)"));
        }
        if self.methods.is_empty() {
            return Err(Error::domain("at least one method is required"));
        }
        if self.methods.contains(&Method::Rw) && self.bootstrap_b < crate::classic::MIN_BOOTSTRAP {
            return Err(Error::domain(format!(
                "bootstrap_b must be >= {}",
                crate::classic::MIN_BOOTSTRAP
            )));
        }
        Ok(())
    }

    /// Grid cells in output order: μ outermost, then n, then c.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &mu in &self.mus {
            for &n in &self.ns {
                for &c in &self.cs {
                    out.push(Cell { mu, n, c });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mu: f64,
    pub n: usize,
    pub c: f64,
}

impl Cell {
    fn key(&self) -> u64 {
        SeedPath::with_path(0, &[self.mu.to_bits(), self.n as u64, self.c.to_bits()]).seed()
    }
}

/// Result of one method on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// `None` when the method failed on this replication.
    pub stat: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: usize,
    /// False when simulation or the least-squares fit failed; such
    /// replications carry no method outcomes.
    pub fitted: bool,
    pub methods: Vec<MethodOutcome>,
}

fn replicate(cfg: &ExperimentConfig, cell: &Cell, index: usize) -> ReplicationOutcome {
    let seed = |purpose| SeedPath::with_path(cfg.root_seed, &[cell.key(), index as u64, purpose]).seed();
    let mut arma = cfg.arma.clone();
    arma.mu = cell.mu;
    let (p, q) = (arma.p(), arma.q());
    let dgp = DgpConfig {
        arma,
        garch: cfg.garch.clone(),
        c: cell.c,
        n: cell.n,
        burn_in: cfg.burn_in,
        seed: seed(PURPOSE_SIMULATE),
    };
    let failed = ReplicationOutcome { index, fitted: false, methods: Vec::new() };
    let Ok(series) = simulate(&dgp) else { return failed };
    let x = series.values();
    let fit = match ls_fit(x, p, q, None) {
        Ok(f) if f.converged => f,
        _ => return failed,
    };
    let methods = cfg
        .methods
        .iter()
        .map(|&method| {
            let res = match method {
                Method::Rw => rw_bootstrap_test(x, &fit, cfg.m, cfg.bootstrap_b, seed(PURPOSE_BOOTSTRAP))
                    .map(|r| (r.stat, r.p_value)),
                Method::El => profile_el_test(x, p, q, cfg.m, ElMode::El, Some(&fit)).map(|o| (o.stat, o.p_value)),
                Method::Wel => profile_el_test(x, p, q, cfg.m, ElMode::Wel, Some(&fit)).map(|o| (o.stat, o.p_value)),
            };
            match res {
                Ok((stat, p_value)) => MethodOutcome { method, stat: Some(stat), p_value: Some(p_value) },
                Err(_) => MethodOutcome { method, stat: None, p_value: None },
            }
        })
        .collect();
    ReplicationOutcome { index, fitted: true, methods }
}

/// All replications of one cell, in replication order. Runs on the current
/// rayon pool.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<Vec<ReplicationOutcome>> {
    cfg.validate()?;
    Ok((0..cfg.reps).into_par_iter().map(|i| replicate(cfg, cell, i)).collect())
}

/// One aggregated line of an experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub mu: f64,
    pub n: usize,
    pub c: f64,
    pub method: Method,
    pub level: f64,
    pub rate: f64,
    /// Replications with a successful fit.
    pub reps: usize,
    pub failures: usize,
}

impl ExperimentRow {
    pub fn flagged(&self) -> bool {
        self.reps == 0 || self.failures as f64 > FAILURE_FLAG_FRACTION * self.reps as f64
    }
}

/// Aggregate replication outcomes of one cell into rows (method-major, then level).
pub fn aggregate(cfg: &ExperimentConfig, cell: &Cell, outcomes: &[ReplicationOutcome]) -> Vec<ExperimentRow> {
    let fitted: Vec<&ReplicationOutcome> = outcomes.iter().filter(|o| o.fitted).collect();
    let fit_failures = outcomes.len() - fitted.len();
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let results: Vec<Option<f64>> = fitted
            .iter()
            .map(|o| o.methods.iter().find(|m| m.method == method).and_then(|m| m.p_value))
            .collect();
        let method_failures = results.iter().filter(|r| r.is_none()).count();
        for &level in &cfg.levels {
            let rejections = results.iter().filter(|r| r.is_some_and(|p| p <= level)).count();
            let reps = fitted.len();
            rows.push(ExperimentRow {
                mu: cell.mu,
                n: cell.n,
                c: cell.c,
                method,
                level,
                rate: if reps == 0 { 0.0 } else { rejections as f64 / reps as f64 },
                reps,
                failures: fit_failures + method_failures,
            });
        }
    }
    rows
}

/// Run the whole grid on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for cell in cfg.cells() {
        let outcomes = run_cell(cfg, &cell)?;
        rows.extend(aggregate(cfg, &cell, &outcomes));
    }
    Ok(rows)
}

/// Run the grid on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ExperimentRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Text, CSV and JSON renderings of a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TableArtifact {
    pub text: String,
    pub csv: String,
    pub json: String,
}

#[derive(Serialize, Deserialize)]
struct JsonSummary {
    caption: String,
    rows: Vec<ExperimentRow>,
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::domain(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::domain(format!("csv: {e}")))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ExperimentRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::domain(format!("csv: {e}")))
}

pub fn rows_from_json(text: &str) -> Result<Vec<ExperimentRow>> {
    serde_json::from_str::<JsonSummary>(text)
        .map(|s| s.rows)
        .map_err(|e| Error::domain(format!("json: {e}")))
}

/// Table with one line per (μ, n, c) and one column per (method, level).
pub fn summarize(rows: &[ExperimentRow], caption: &str) -> Result<TableArtifact> {
    if rows.is_empty() {
        return Err(Error::domain("nothing to summarize"));
    }
    let mut columns: Vec<(Method, u64)> = Vec::new();
    let mut lines: Vec<(u64, usize, u64)> = Vec::new();
    let mut cells: BTreeMap<((u64, usize, u64), (Method, u64)), &ExperimentRow> = BTreeMap::new();
    for row in rows {
        let col = (row.method, row.level.to_bits());
        let line = (row.mu.to_bits(), row.n, row.c.to_bits());
        if !columns.contains(&col) {
            columns.push(col);
        }
        if !lines.contains(&line) {
            lines.push(line);
        }
        cells.insert((line, col), row);
    }

    let mut text = String::new();
    let _ = writeln!(text, "{caption}");
    let _ = write!(text, "{:>8} {:>6} {:>6}", "mu", "n", "c");
    for (method, level) in &columns {
        let _ = write!(text, " {:>10}", format!("{}@{}", method.label(), f64::from_bits(*level)));
    }
    text.push('\n');
    for line in &lines {
        let (mu, n, c) = (f64::from_bits(line.0), line.1, f64::from_bits(line.2));
        let _ = write!(text, "{mu:>8} {n:>6} {c:>6}");
        for col in &columns {
            match cells.get(&(*line, *col)) {
                Some(r) => {
                    let mark = if r.flagged() { "!" } else { "" };
                    let _ = write!(text, " {:>10}", format!("{:.3}{mark}", r.rate));
                }
                None => {
                    let _ = write!(text, " {:>10}", "-");
                }
            }
        }
        text.push('\n');
    }

    let json = serde_json::to_string_pretty(&JsonSummary { caption: caption.to_string(), rows: rows.to_vec() })
        .map_err(|e| Error::domain(format!("json: {e}")))?;
    Ok(TableArtifact { text, csv: rows_to_csv(rows)?, json })
}
