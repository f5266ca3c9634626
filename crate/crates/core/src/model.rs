//! ARMA and GARCH parameter records, stationarity checks and the simulation
//! DGP.
//!
//! The simulated process is
//!
//! ```text
//! X_t = μ + Σ φ_i X_{t-i} + Σ ψ_j ε_{t-j} + ε_t
//! ε_t = η_t σ_t,   σ_t² = ω + Σ a_i ε²_{t-i} + Σ b_j σ²_{t-j}
//! η_t = (k e_{t-1} + e_t) / √(1 + k²),   k = c / √n,   e_t iid N(0,1)
//! ```
//!
//! so `c = 0` gives iid standard normal `η_t` and `c > 0` a local
//! alternative with first-order serial dependence of order `1/√n`.

use std::ops::Deref;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Roots closer than this are treated as shared; moduli must exceed `1 + ROOT_TOL`.
pub const ROOT_TOL: f64 = 1e-8;

/// Default number of discarded presample observations.
pub const DEFAULT_BURN_IN: usize = 500;

/// Parameters of `X_t = μ + Σ φ_i X_{t-i} + Σ ψ_j ε_{t-j} + ε_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub mu: f64,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub psi: Vec<f64>,
}

impl ArmaSpec {
    pub fn new(mu: f64, phi: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        let spec = Self { mu, phi, psi };
        spec.validate()?;
        Ok(spec)
    }

    /// Intercept-only model.
    pub fn white_noise(mu: f64) -> Self {
        Self { mu, phi: Vec::new(), psi: Vec::new() }
    }

    pub fn zeros(p: usize, q: usize) -> Self {
        Self { mu: 0.0, phi: vec![0.0; p], psi: vec![0.0; q] }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.mu.is_finite()
            && self.phi.iter().all(|v| v.is_finite())
            && self.psi.iter().all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::domain("ARMA coefficients must be finite"))
        }
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn q(&self) -> usize {
        self.psi.len()
    }

    /// Number of free parameters, `p + q + 1`.
    pub fn dim(&self) -> usize {
        1 + self.phi.len() + self.psi.len()
    }

    /// Flatten to `(μ, φ_1..φ_p, ψ_1..ψ_q)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.mu);
        v.extend_from_slice(&self.phi);
        v.extend_from_slice(&self.psi);
        v
    }

    /// Inverse of [`ArmaSpec::to_vec`].
    pub fn from_vec(p: usize, q: usize, theta: &[f64]) -> Self {
        assert_eq!(theta.len(), 1 + p + q, "parameter vector has wrong length");
        Self {
            mu: theta[0],
            phi: theta[1..1 + p].to_vec(),
            psi: theta[1 + p..].to_vec(),
        }
    }

    /// `φ(1) = 1 − Σ φ_i`.
    pub fn ar_at_one(&self) -> f64 {
        1.0 - self.phi.iter().sum::<f64>()
    }
}

/// Positivity-constrained GARCH(r, s) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchSpec {
    pub omega: f64,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

impl GarchSpec {
    /// Requires `ω > 0` and nonnegative finite `a_i`, `b_j`.
    pub fn new(omega: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let spec = Self { omega, a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::domain(format!("GARCH omega must be > 0, got {}", self.omega)));
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("GARCH coefficients must be finite and nonnegative"));
        }
        Ok(())
    }

    /// True when every `a_i` and `b_j` is strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.a.iter().chain(&self.b).all(|v| *v > 0.0)
    }

    /// `Σ a_i + Σ b_j`.
    pub fn persistence(&self) -> f64 {
        self.a.iter().sum::<f64>() + self.b.iter().sum::<f64>()
    }

    /// `ω / (1 − Σa − Σb)` when that is finite and positive.
    pub fn unconditional_variance(&self) -> Option<f64> {
        let p = self.persistence();
        (p < 1.0).then(|| self.omega / (1.0 - p))
    }
}

/// Everything needed to draw one simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub arma: ArmaSpec,
    pub garch: GarchSpec,
    /// Local-alternative drift; `0` is the null.
    pub c: f64,
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        self.arma.validate()?;
        self.garch.validate()?;
        if !self.c.is_finite() {
            return Err(Error::domain("local-alternative drift c must be finite"));
        }
        if self.n < 50 {
            return Err(Error::domain(format!("sample size must be >= 50, got {}", self.n)));
        }
        Ok(())
    }
}

/// A finite, fixed-length series of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    /// `k · X`, used for scale checks.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * k).collect())
    }
}

impl Deref for TimeSeries {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of [`check_stationarity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCheck {
    pub ok: bool,
    pub min_root_modulus_ar: f64,
    pub min_root_modulus_ma: f64,
    pub common_root: bool,
}

/// Roots of `c_0 + c_1 z + … + c_d z^d` from the companion-matrix eigenvalues.
/// Trailing zero coefficients are dropped; a constant polynomial has no roots.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let Some(deg) = coeffs.iter().rposition(|c| *c != 0.0) else {
        return Vec::new();
    };
    match deg {
        0 => Vec::new(),
        1 => vec![Complex::new(-coeffs[0] / coeffs[1], 0.0)],
        _ => {
            let lead = coeffs[deg];
            let mut companion = DMatrix::<f64>::zeros(deg, deg);
            for i in 1..deg {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..deg {
                companion[(i, deg - 1)] = -coeffs[i] / lead;
            }
            companion.complex_eigenvalues().iter().copied().collect()
        }
    }
}

fn min_modulus(roots: &[Complex<f64>]) -> f64 {
    roots.iter().map(|r| r.norm()).fold(f64::INFINITY, f64::min)
}

/// Check that `φ(z) = 1 − Σ φ_i z^i` and `ψ(z) = 1 + Σ ψ_j z^j` have all
/// roots outside the unit circle and share none.
pub fn check_stationarity(spec: &ArmaSpec) -> StationarityCheck {
    let ar_coeffs: Vec<f64> = std::iter::once(1.0).chain(spec.phi.iter().map(|v| -v)).collect();
    let ma_coeffs: Vec<f64> = std::iter::once(1.0).chain(spec.psi.iter().copied()).collect();
    let ar_roots = polynomial_roots(&ar_coeffs);
    let ma_roots = polynomial_roots(&ma_coeffs);
    let min_ar = min_modulus(&ar_roots);
    let min_ma = min_modulus(&ma_roots);
    let common_root = ar_roots
        .iter()
        .any(|a| ma_roots.iter().any(|b| (a - b).norm() <= ROOT_TOL));
    StationarityCheck {
        ok: min_ar > 1.0 + ROOT_TOL && min_ma > 1.0 + ROOT_TOL && !common_root,
        min_root_modulus_ar: min_ar,
        min_root_modulus_ma: min_ma,
        common_root,
    }
}

/// Convenience wrapper returning an error for parameters outside the region.
pub fn require_stationary(spec: &ArmaSpec) -> Result<()> {
    let check = check_stationarity(spec);
    if check.ok {
        Ok(())
    } else {
        Err(Error::NonStationary {
            ar: check.min_root_modulus_ar,
            ma: check.min_root_modulus_ma,
            common: check.common_root,
        })
    }
}

/// Draw one path of the DGP; the first `burn_in` points are discarded.
pub fn simulate(cfg: &DgpConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    require_stationary(&cfg.arma)?;

    let ArmaSpec { mu, phi, psi } = &cfg.arma;
    let GarchSpec { omega, a, b } = &cfg.garch;
    let total = cfg.burn_in + cfg.n;
    let k = cfg.c / (cfg.n as f64).sqrt();
    let norm = (1.0 + k * k).sqrt();
    let sigma2_start = cfg.garch.unconditional_variance().unwrap_or(*omega);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut e_prev: f64 = rng.sample(StandardNormal);

    let mut x = vec![0.0; total];
    let mut eps = vec![0.0; total];
    let mut sigma2 = vec![0.0; total];
    for t in 0..total {
        let e: f64 = rng.sample(StandardNormal);
        let eta = (k * e_prev + e) / norm;
        e_prev = e;

        let mut s2 = *omega;
        for (i, ai) in a.iter().enumerate() {
            s2 += ai * t.checked_sub(i + 1).map_or(0.0, |j| eps[j] * eps[j]);
        }
        for (j, bj) in b.iter().enumerate() {
            s2 += bj * t.checked_sub(j + 1).map_or(sigma2_start, |s| sigma2[s]);
        }
        sigma2[t] = s2;
        eps[t] = eta * s2.sqrt();

        let mut xt = mu + eps[t];
        for (i, ph) in phi.iter().enumerate() {
            xt += ph * t.checked_sub(i + 1).map_or(0.0, |s| x[s]);
        }
        for (j, ps) in psi.iter().enumerate() {
            xt += ps * t.checked_sub(j + 1).map_or(0.0, |s| eps[s]);
        }
        x[t] = xt;

        if !(xt.is_finite() && s2.is_finite()) {
            return Err(Error::SimulationFailed { index: t });
        }
    }
    x.drain(..cfg.burn_in);
    TimeSeries::new(x)
}
