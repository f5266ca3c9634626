//! Residual autocorrelations, Box–Pierce / Ljung–Box statistics and the
//! random-weight bootstrap portmanteau test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::estimation::{normal_equations, residuals, residuals_and_gradient, FitResult};
use crate::linalg::spd_solve;
use crate::model::ArmaSpec;
use crate::stats_util::{chi2_sf_nonneg, SeedPath};
use crate::{Error, Result};

/// Minimum number of bootstrap replicates.
pub const MIN_BOOTSTRAP: usize = 200;

/// Sample autocorrelations `ρ̂_1..ρ̂_m` of a residual series.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfVector {
    pub rho: Vec<f64>,
    pub n: usize,
}

impl AcfVector {
    pub fn m(&self) -> usize {
        self.rho.len()
    }
}

/// `ρ̂_k = Σ_{t>k} ε_t ε_{t-k} / Σ ε_t²` for `k = 1..m`.
pub fn residual_acf(eps: &[f64], m: usize) -> Result<AcfVector> {
    if m == 0 || eps.len() <= m {
        return Err(Error::domain(format!(
            "need 1 <= m < n, got m = {m}, n = {}",
            eps.len()
        )));
    }
    let rho = weighted_acf(eps, m, None)?;
    Ok(AcfVector { rho, n: eps.len() })
}

fn weighted_acf(eps: &[f64], m: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let v = |t: usize| weights.map_or(1.0, |w| w[t]);
    let energy: f64 = eps.iter().enumerate().map(|(t, e)| v(t) * e * e).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok((1..=m)
        .map(|k| (k..eps.len()).map(|t| v(t) * eps[t] * eps[t - k]).sum::<f64>() / energy)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortmanteauKind {
    BoxPierce,
    LjungBox,
}

/// Outcome of a single portmanteau test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub m: usize,
    pub stat: f64,
    pub p_value: f64,
    pub reject_010: bool,
    pub reject_005: bool,
}

impl TestReport {
    pub fn new(name: impl Into<String>, m: usize, stat: f64, p_value: f64) -> Self {
        Self {
            name: name.into(),
            m,
            stat,
            p_value,
            reject_010: p_value <= 0.10,
            reject_005: p_value <= 0.05,
        }
    }

    pub fn rejects(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

/// `Q_m = n Σ ρ̂_k²` or `Q̃_m = n Σ (n+2)/(n−k) ρ̂_k²`, referred to χ²_m.
pub fn portmanteau(acf: &AcfVector, kind: PortmanteauKind) -> Result<TestReport> {
    let n = acf.n as f64;
    let m = acf.m();
    let (name, stat) = match kind {
        PortmanteauKind::BoxPierce => ("box_pierce", n * acf.rho.iter().map(|r| r * r).sum::<f64>()),
        PortmanteauKind::LjungBox => {
            if acf.n <= m {
                return Err(Error::WeightDenominator);
            }
            let s: f64 = acf
                .rho
                .iter()
                .enumerate()
                .map(|(i, r)| (n + 2.0) / (n - (i + 1) as f64) * r * r)
                .sum();
            ("ljung_box", n * s)
        }
    };
    Ok(TestReport::new(name, m, stat, chi2_sf_nonneg(stat, m)))
}

/// Multiplier weights for the random-weight bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierWeights {
    /// I.i.d. Exp(1): mean one, variance one.
    Exponential,
    /// All weights equal to one; replicates carry no perturbation.
    Unit,
}

/// Bootstrap test together with its replicate statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RwBootstrap {
    pub report: TestReport,
    /// `Q*_b` for every replicate that was not skipped, in replicate order.
    pub replicates: Vec<f64>,
    pub skipped: usize,
}

/// `(1 + #{Q*_b ≥ stat}) / (B + 1)` over the completed replicates.
pub fn bootstrap_p_value(stat: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|q| **q >= stat).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Random-weight bootstrap portmanteau test with identity weighting matrix.
pub fn rw_bootstrap_test(x: &[f64], fit: &FitResult, m: usize, b: usize, seed: u64) -> Result<TestReport> {
    rw_bootstrap_detailed(x, fit, m, b, seed, MultiplierWeights::Exponential).map(|r| r.report)
}

/// The statistic is `n ρ̂ᵀρ̂`. Replicate `b` draws weights `v_t`, moves θ̂ by
/// one Gauss–Newton step on the `v`-weighted estimating equations, recomputes
/// the `v`-weighted residual autocorrelations `ρ̂*` and records
/// `n (ρ̂* − ρ̂)ᵀ(ρ̂* − ρ̂)`. A replicate whose step is singular is skipped;
/// more than 10% skipped is an error.
pub fn rw_bootstrap_detailed(
    x: &[f64],
    fit: &FitResult,
    m: usize,
    b: usize,
    seed: u64,
    weights: MultiplierWeights,
) -> Result<RwBootstrap> {
    if b < MIN_BOOTSTRAP {
        return Err(Error::domain(format!("need at least {MIN_BOOTSTRAP} bootstrap replicates, got {b}")));
    }
    if !fit.converged {
        return Err(Error::FitNotConverged);
    }
    let theta = &fit.theta_hat;
    let (p, q) = (theta.p(), theta.q());
    let k = theta.dim();
    let n = x.len();
    let pack = residuals_and_gradient(theta, x)?;
    let rho = residual_acf(&pack.eps, m)?.rho;
    let stat = n as f64 * rho.iter().map(|r| r * r).sum::<f64>();
    let base = theta.to_vec();

    let root = SeedPath::new(seed);
    let mut replicates = Vec::with_capacity(b);
    let mut skipped = 0;
    let mut v = vec![1.0; n];
    for rep in 0..b {
        if weights == MultiplierWeights::Exponential {
            let mut rng = ChaCha8Rng::seed_from_u64(root.child(rep as u64).seed());
            v.iter_mut().for_each(|w| *w = Exp1.sample(&mut rng));
        }
        let (jtj, jte) = normal_equations(&pack, p, Some(&v));
        let rhs: Vec<f64> = jte.iter().map(|g| -g).collect();
        let Some(step) = spd_solve(&jtj, &rhs, k) else {
            skipped += 1;
            continue;
        };
        let moved: Vec<f64> = base.iter().zip(&step).map(|(a, d)| a + d).collect();
        let eps_star = residuals(&ArmaSpec::from_vec(p, q, &moved), x);
        let Ok(rho_star) = weighted_acf(&eps_star, m, Some(&v)) else {
            skipped += 1;
            continue;
        };
        let q_star = n as f64 * rho_star.iter().zip(&rho).map(|(a, r)| (a - r).powi(2)).sum::<f64>();
        if q_star.is_finite() {
            replicates.push(q_star);
        } else {
            skipped += 1;
        }
    }
    if skipped * 10 > b {
        return Err(Error::TooManySkipped { skipped, total: b });
    }
    let p_value = bootstrap_p_value(stat, &replicates);
    Ok(RwBootstrap { report: TestReport::new("rw_bootstrap", m, stat, p_value), replicates, skipped })
}
