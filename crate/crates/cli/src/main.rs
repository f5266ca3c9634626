use std::path::PathBuf;
use std::process::ExitCode;

use arma_el::diagnostics::{arch_lm, lyapunov_exponent, weight_moment_report, DEFAULT_XI_DELTA, DEFAULT_XI_RHO};
use arma_el::el::{self_weights, DEFAULT_QUANTILE_LEVEL};
use arma_el::estimation::{ls_fit, residuals};
use arma_el::harness::{run_experiment_with_workers, summarize, ExperimentConfig};
use arma_el::model::GarchSpec;
use arma_el_cli::{ingest_csv, render, run_tests, CliError, ColumnSelector, OutputFormat, RunConfig, TestKind, Transform};
use clap::{Parser, Subcommand};

/// Worker threads for `simulate-study`; defaults to all available cores.
const WORKERS_ENV: &str = "ARMA_EL_WORKERS";

#[derive(Parser)]
#[command(name = "arma-el", version, about = "Portmanteau tests for ARMA models with possibly heavy-tailed GARCH errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct InputArgs {
    /// CSV file, or `-` for standard input.
    #[arg(long)]
    input: PathBuf,
    /// Column name or zero-based index; defaults to the last column.
    #[arg(long)]
    column: Option<ColumnSelector>,
    #[arg(long, value_enum, default_value = "none")]
    transform: Transform,
}

#[derive(Subcommand)]
enum Command {
    /// Fit ARMA(p, q) and run portmanteau tests on its residuals.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Comma-separated subset of bp, lb, rw, el, wel.
        #[arg(long, value_delimiter = ',', default_value = "lb,rw,el,wel")]
        tests: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        /// Random-weight bootstrap replicates.
        #[arg(long = "rw-B", default_value_t = 500)]
        rw_b: usize,
    },
    /// Run a Monte Carlo size/power study from a JSON configuration.
    SimulateStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// ARCH-LM screen, weighted moment proxy and optional Lyapunov exponent.
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        /// GARCH(1,1) coefficients `a,b` for the Lyapunov exponent.
        #[arg(long, value_delimiter = ',')]
        lyapunov: Option<Vec<f64>>,
        #[arg(long, default_value_t = 4)]
        arch_lags: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_tests(raw: &[String]) -> Result<Vec<TestKind>, CliError> {
    use clap::ValueEnum;
    let mut out = Vec::new();
    for name in raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let kind = TestKind::from_str(name, true).map_err(|_| CliError::Precondition(format!("unknown test \"{name}\"")))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

fn workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| CliError::Precondition(format!("{WORKERS_ENV} must be a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Test { input, p, q, m, tests, seed, format, rw_b } => {
            let cfg = RunConfig { p, q, m, tests: parse_tests(&tests)?, seed, rw_b };
            cfg.validate()?;
            let series = ingest_csv(&input.input, input.column.as_ref(), input.transform)?;
            let report = run_tests(&cfg, &series, input.transform)?;
            render(&report, format)
        }
        Command::SimulateStudy { config, out, reps, seed } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Precondition(format!("config: {e}")))?;
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            cfg.validate()?;
            let rows = run_experiment_with_workers(&cfg, workers()?)?;
            let caption = format!(
                "ARMA({},{}) with GARCH a={:?} b={:?}, m={}",
                cfg.arma.p(),
                cfg.arma.q(),
                cfg.garch.a,
                cfg.garch.b,
                cfg.m
            );
            let table = summarize(&rows, &caption)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("rows.csv"), &table.csv)?;
            std::fs::write(out.join("summary.json"), &table.json)?;
            std::fs::write(out.join("table.txt"), &table.text)?;
            Ok(table.text)
        }
        Command::Diagnose { input, p, q, lyapunov, arch_lags, seed } => {
            let series = ingest_csv(&input.input, input.column.as_ref(), input.transform)?;
            let x = series.values();
            let fit = ls_fit(x, p, q, None).map_err(CliError::Fit)?;
            let eps = residuals(&fit.theta_hat, x);
            let mut s = String::new();
            let lm = arch_lm(&eps, arch_lags)?;
            s.push_str(&format!(
                "arch_lm: lags = {}, stat = {}, p_value = {} {}\n",
                lm.m,
                arma_el_cli::round12(lm.stat),
                arma_el_cli::round12(lm.p_value),
                arma_el_cli::stars(lm.p_value)
            ));
            let w = self_weights(x, DEFAULT_QUANTILE_LEVEL)?;
            let wm = weight_moment_report(x, &w, DEFAULT_XI_RHO, DEFAULT_XI_DELTA)?;
            s.push_str(&format!(
                "weight_moment: mean = {}, last_half = {}, stable = {}\n",
                arma_el_cli::round12(wm.full_mean),
                arma_el_cli::round12(wm.last_half_mean),
                wm.stable
            ));
            if let Some(ab) = lyapunov {
                if ab.len() != 2 {
                    return Err(CliError::Precondition("--lyapunov takes exactly two values a,b".into()));
                }
                let garch = GarchSpec::new(1.0, vec![ab[0]], vec![ab[1]])?;
                let est = lyapunov_exponent(&garch, 10_000, 20, seed)?;
                s.push_str(&format!(
                    "lyapunov: a = {}, b = {}, nu = {}, std_err = {}\n",
                    ab[0],
                    ab[1],
                    arma_el_cli::round12(est.nu_star_hat),
                    arma_el_cli::round12(est.std_err)
                ));
            }
            Ok(s)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1; clap would use 2, which is reserved for fit failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
