//! Stationarity and moment diagnostics for the GARCH error process, plus
//! the ARCH-LM screen.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classic::TestReport;
use crate::el::SelfWeights;
use crate::linalg::ols;
use crate::model::GarchSpec;
use crate::stats_util::{chi2_sf_nonneg, SeedPath};
use crate::{Error, Result};

pub const DEFAULT_RENORM_PERIOD: usize = 50;
pub const DEFAULT_XI_RHO: f64 = 0.95;
pub const DEFAULT_XI_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub nu_star_hat: f64,
    /// Standard error across independent paths; zero up to rounding when the product is deterministic.
    pub std_err: f64,
    pub t: usize,
    pub reps: usize,
}

/// Companion matrix of the squared-volatility recursion, row-major.
///
/// State `(σ²_t, …, σ²_{t-s+1}, ε²_t, …, ε²_{t-r+2})` with `r, s` padded to at
/// least one by zero coefficients.
fn companion(garch: &GarchSpec, eta2: f64, out: &mut [f64], dim: usize, s: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let coef = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    out[0] = coef(&garch.a, 0) * eta2 + coef(&garch.b, 0);
    for j in 1..s {
        out[j] = garch.b[j];
    }
    for i in 1..dim - s + 1 {
        out[s + i - 1] = coef(&garch.a, i);
    }
    for j in 1..s {
        out[j * dim + j - 1] = 1.0;
    }
    if dim > s {
        out[s * dim] = eta2;
        for i in s + 1..dim {
            out[i * dim + i - 1] = 1.0;
        }
    }
}

fn companion_dims(garch: &GarchSpec) -> (usize, usize) {
    let r = garch.a.len().max(1);
    let s = garch.b.len().max(1);
    (r + s - 1, s)
}

/// `(1/T) ln ‖A_T ⋯ A_1‖₂` for the given innovations, rescaling the running
/// product every `period` steps.
pub fn lyapunov_path(garch: &GarchSpec, etas: &[f64], period: usize) -> Result<f64> {
    if etas.is_empty() || period == 0 {
        return Err(Error::domain("need a nonempty path and a positive renormalization period"));
    }
    let (dim, s) = companion_dims(garch);
    let mut prod = vec![0.0; dim * dim];
    (0..dim).for_each(|i| prod[i * dim + i] = 1.0);
    let mut a = vec![0.0; dim * dim];
    let mut next = vec![0.0; dim * dim];
    let mut log_scale = 0.0;
    for (step, eta) in etas.iter().enumerate() {
        companion(garch, eta * eta, &mut a, dim, s);
        for i in 0..dim {
            for j in 0..dim {
                next[i * dim + j] = (0..dim).map(|k| a[i * dim + k] * prod[k * dim + j]).sum();
            }
        }
        std::mem::swap(&mut prod, &mut next);
        if (step + 1) % period == 0 || step + 1 == etas.len() {
            let scale = prod.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !scale.is_finite() {
                return Err(Error::Overflow { step: step + 1 });
            }
            if scale == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            prod.iter_mut().for_each(|v| *v /= scale);
            log_scale += scale.ln();
        }
    }
    let norm = if dim == 1 {
        prod[0].abs()
    } else {
        DMatrix::from_row_slice(dim, dim, &prod).singular_values().max()
    };
    Ok((log_scale + norm.ln()) / etas.len() as f64)
}

/// Monte Carlo estimate of the top Lyapunov exponent from `reps` independent
/// Gaussian paths of length `t`.
pub fn lyapunov_exponent(garch: &GarchSpec, t: usize, reps: usize, seed: u64) -> Result<LyapunovEstimate> {
    lyapunov_exponent_with_period(garch, t, reps, seed, DEFAULT_RENORM_PERIOD)
}

pub fn lyapunov_exponent_with_period(
    garch: &GarchSpec,
    t: usize,
    reps: usize,
    seed: u64,
    period: usize,
) -> Result<LyapunovEstimate> {
    if t < 1000 || reps < 10 {
        return Err(Error::domain(format!("need T >= 1000 and reps >= 10, got T = {t}, reps = {reps}")));
    }
    garch.validate()?;
    let paths: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(SeedPath::with_path(seed, &[rep as u64]).seed());
            let etas: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
            lyapunov_path(garch, &etas, period)
        })
        .collect::<Result<_>>()?;
    let k = reps as f64;
    let mean = paths.iter().sum::<f64>() / k;
    let var = paths.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(LyapunovEstimate { nu_star_hat: mean, std_err: (var / k).sqrt(), t, reps })
}

/// `ξ_{ρ,t} = 1 + Σ_{i=1}^{t-1} ρ^i |X_{t-i}|` for `t = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSeries {
    pub xi: Vec<f64>,
    pub rho: f64,
}

pub fn xi_series(x: &[f64], rho: f64) -> Result<XiSeries> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    let mut acc = 0.0;
    let xi = x
        .iter()
        .map(|v| {
            let out = 1.0 + acc;
            acc = rho * (acc + v.abs());
            out
        })
        .collect();
    Ok(XiSeries { xi, rho })
}

/// Sample mean of `w_t^{-4} ξ_{ρ,t}^{4+δ}` over `t = 1..n`.
pub fn weight_moment_check(x: &[f64], w: &SelfWeights, rho: f64, delta: f64) -> Result<f64> {
    Ok(weight_moment_report(x, w, rho, delta)?.full_mean)
}

/// Finite-sample proxy for the weighted moment condition and whether its
/// running mean has settled.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMomentReport {
    pub full_mean: f64,
    pub last_half_mean: f64,
    /// Last-half and full-sample means agree within 20%.
    pub stable: bool,
}

pub fn weight_moment_report(x: &[f64], w: &SelfWeights, rho: f64, delta: f64) -> Result<WeightMomentReport> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    if x.len() < 2 || w.len() != x.len() {
        return Err(Error::domain("need at least two observations and matching self-weights"));
    }
    let xi = xi_series(x, rho)?.xi;
    let terms: Vec<f64> = xi
        .iter()
        .zip(w.weights())
        .map(|(xi, w)| xi.powf(4.0 + delta) / w.powi(4))
        .collect();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let full_mean = mean(&terms);
    let last_half_mean = mean(&terms[terms.len() / 2..]);
    let stable = (last_half_mean - full_mean).abs() <= 0.2 * full_mean.abs();
    Ok(WeightMomentReport { full_mean, last_half_mean, stable })
}

/// Engle's LM test: regress `ε_t²` on an intercept and `lags` of its own lags;
/// the statistic is (rows)·R², referred to χ²_lags.
pub fn arch_lm(eps: &[f64], lags: usize) -> Result<TestReport> {
    let n = eps.len();
    if lags == 0 || n <= 10 * lags {
        return Err(Error::domain(format!("ARCH-LM needs lags >= 1 and more than {} observations", 10 * lags)));
    }
    let sq: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let y = &sq[lags..];
    let k = lags + 1;
    let mut design = Vec::with_capacity(y.len() * k);
    for t in lags..n {
        design.push(1.0);
        design.extend((1..=lags).map(|l| sq[t - l]));
    }
    let fit = ols(&design, y, k).ok_or(Error::CollinearDesign)?;
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::CollinearDesign);
    }
    let sse: f64 = y.iter().zip(&fit.fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let stat = y.len() as f64 * (1.0 - sse / sst).max(0.0);
    Ok(TestReport::new("arch_lm", lags, stat, chi2_sf_nonneg(stat, lags)))
}
