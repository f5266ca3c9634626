//! Empirical-likelihood portmanteau statistics.
//!
//! For a candidate θ the auxiliary vectors are, for `t = m+1..n`,
//!
//! ```text
//! Z_t  = ( ε_t ∂ε_t/∂θ ,  ε_t ε_{t-1}, …, ε_t ε_{t-m} )
//! Z̃_t  = ( w_{t-1}^{-2} ε_t ∂ε_t/∂θ ,  w_{t-1}^{-1} w_{t-1-l}^{-1} ε_t ε_{t-l} )
//! ```
//!
//! `-2 log L(θ, 0) = 2 Σ log(1 + λᵀ Z_t)` where λ solves
//! `Σ Z_t / (1 + λᵀ Z_t) = 0`; the test statistic minimizes this over θ.
//! Under the null it is asymptotically χ²_m: `Z_t` for finite fourth moments
//! (EL), `Z̃_t` with the self-weights `w_t` when the innovation variance may be
//! infinite (WeL).

use serde::{Deserialize, Serialize};

use crate::estimation::{ls_fit, residuals_and_gradient, FitResult, ResidualPack};
use crate::linalg::spd_solve;
use crate::model::{check_stationarity, ArmaSpec};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats_util::{chi2_sf_nonneg, empirical_quantile};
use crate::{Error, Result};

pub const DEFAULT_QUANTILE_LEVEL: f64 = 0.9;

/// Kernel terms `exp(−ln²(i+1))` below this are dropped from the weight sum.
const KERNEL_CUTOFF: f64 = 1e-20;

const DUAL_MAX_ITER: usize = 100;
const DUAL_GRAD_TOL: f64 = 1e-9;
const DUAL_MIN_STEP: f64 = 1e-14;

/// Self-weights `w_t = max{M_X, Σ_{i=0}^{t} e^{-ln²(i+1)} |X_{t-i}|}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfWeights {
    w: Vec<f64>,
    m_x: f64,
}

impl SelfWeights {
    /// All weights equal to one (`M_X = 1`), so `Z̃ = Z`.
    pub fn unit(n: usize) -> Self {
        Self { w: vec![1.0; n], m_x: 1.0 }
    }

    /// `w_1..w_n`.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn m_x(&self) -> f64 {
        self.m_x
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `w_t` for one-based `t`, with `w_0 = M_X`.
    pub fn at(&self, t: usize) -> f64 {
        if t == 0 {
            self.m_x
        } else {
            self.w[t - 1]
        }
    }
}

fn weight_kernel(n: usize) -> Vec<f64> {
    let mut kernel = Vec::new();
    for i in 0..n {
        let l = ((i + 1) as f64).ln();
        let c = (-l * l).exp();
        if c < KERNEL_CUTOFF {
            break;
        }
        kernel.push(c);
    }
    kernel
}

/// Self-weights with `M_X` the nearest-rank `quantile_level` quantile of `|X|`.
pub fn self_weights(x: &[f64], quantile_level: f64) -> Result<SelfWeights> {
    if x.is_empty() {
        return Err(Error::domain("self-weights of an empty series"));
    }
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let m_x = empirical_quantile(&abs, quantile_level)?;
    self_weights_with_floor(x, m_x)
}

/// Self-weights for a given floor `M_X > 0`.
pub fn self_weights_with_floor(x: &[f64], m_x: f64) -> Result<SelfWeights> {
    if !(m_x > 0.0) || !m_x.is_finite() {
        return Err(Error::DegenerateSeries);
    }
    let kernel = weight_kernel(x.len());
    let w = (0..x.len())
        .map(|t| {
            let sum: f64 = kernel
                .iter()
                .zip(x[..=t].iter().rev())
                .map(|(c, v)| c * v.abs())
                .sum();
            sum.max(m_x)
        })
        .collect();
    Ok(SelfWeights { w, m_x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMode {
    Unweighted,
    Weighted,
}

/// `N × d` matrix of auxiliary vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    mode: MomentMode,
    m: usize,
}

impl MomentMatrix {
    /// Build directly from rows; useful for exercising the dual solver.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::domain("moment rows must be nonempty and of equal length"));
        }
        Ok(Self {
            data: rows.concat(),
            rows: rows.len(),
            dim,
            mode: MomentMode::Unweighted,
            m: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> MomentMode {
        self.mode
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column sums `Σ_t Z_t`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for row in self.data.chunks_exact(self.dim) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

/// Auxiliary vectors at γ = 0 for rows `t = m+1..n`; weighted when `weights` is given.
pub fn moment_vectors(
    pack: &ResidualPack,
    m: usize,
    weights: Option<&SelfWeights>,
) -> Result<MomentMatrix> {
    if m == 0 {
        return Err(Error::domain("number of lags m must be >= 1"));
    }
    let n = pack.len();
    let k = pack.dim();
    let dim = k + m;
    let rows = n.saturating_sub(m);
    if rows <= dim {
        return Err(Error::InsufficientSample { rows, dim });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::domain("self-weights length differs from the series length"));
        }
    }
    let eps = &pack.eps;
    let mut data = Vec::with_capacity(rows * dim);
    // Zero-based index `t` is one-based `t + 1`.
    for t in m..n {
        let (score_scale, prev) = match weights {
            Some(w) => {
                let wp = w.at(t);
                (1.0 / (wp * wp), Some(wp))
            }
            None => (1.0, None),
        };
        let e = eps[t];
        data.extend(pack.grad_row(t).iter().map(|g| score_scale * e * g));
        for l in 1..=m {
            let prod = e * eps[t - l];
            data.push(match (weights, prev) {
                (Some(w), Some(wp)) => prod / (wp * w.at(t - l)),
                _ => prod,
            });
        }
    }
    Ok(MomentMatrix {
        data,
        rows,
        dim,
        mode: if weights.is_some() { MomentMode::Weighted } else { MomentMode::Unweighted },
        m,
    })
}

/// Solution of the inner Lagrange problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub lambda: Vec<f64>,
    /// `2 Σ log(1 + λᵀ Z_t)`, `+∞` when 0 is outside the convex hull.
    pub neg2log: f64,
    /// `‖Σ Z_t / (1 + λᵀ Z_t)‖_∞` at `lambda`.
    pub residual: f64,
    pub feasible: bool,
    pub iterations: usize,
}

impl DualSolution {
    fn infeasible(lambda: Vec<f64>, residual: f64, iterations: usize) -> Self {
        Self { lambda, neg2log: f64::INFINITY, residual, feasible: false, iterations }
    }
}

/// Maximize `Σ log(1 + λᵀ Z_t)` over λ by damped Newton, keeping every
/// `1 + λᵀ Z_t ≥ 1/N`.
///
/// Infeasibility (0 not interior to the hull of the rows) is detected when an
/// iterate satisfies `λᵀ Z_t ≥ 0` for all `t`, which separates 0 from the
/// hull, or when the line search collapses without progress.
pub fn dual_solve(z: &MomentMatrix) -> Result<DualSolution> {
    dual_solve_rows(&z.data, z.rows, z.dim)
}

pub(crate) fn dual_solve_rows(z: &[f64], rows: usize, dim: usize) -> Result<DualSolution> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("moment matrix contains non-finite values"));
    }
    let floor = 1.0 / rows as f64;
    let mut lambda = vec![0.0; dim];
    let mut denom = vec![1.0; rows];
    let mut obj = 0.0f64;
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];

    for iter in 0..DUAL_MAX_ITER {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for (row, &s) in z.chunks_exact(dim).zip(&denom) {
            let inv = 1.0 / s;
            for i in 0..dim {
                let a = row[i] * inv;
                grad[i] += a;
                for j in 0..=i {
                    hess[i * dim + j] += a * row[j] * inv;
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                hess[j * dim + i] = hess[i * dim + j];
            }
        }
        let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if residual < DUAL_GRAD_TOL {
            return Ok(DualSolution {
                lambda,
                neg2log: (2.0 * obj).max(0.0),
                residual,
                feasible: true,
                iterations: iter,
            });
        }

        let step = match spd_solve(&hess, &grad, dim) {
            Some(s) => s,
            None => {
                let trace: f64 = (0..dim).map(|i| hess[i * dim + i]).sum();
                let ridge = 1e-12 * trace.max(f64::MIN_POSITIVE) / dim as f64;
                let mut damped = hess.clone();
                (0..dim).for_each(|i| damped[i * dim + i] += ridge);
                spd_solve(&damped, &grad, dim).ok_or(Error::DualNotConverged { residual })?
            }
        };
        let decrement: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();

        let mut alpha = 1.0;
        let mut trial = vec![0.0; dim];
        let mut trial_denom = vec![0.0; rows];
        let accepted = loop {
            for ((t, l), s) in trial.iter_mut().zip(&lambda).zip(&step) {
                *t = l + alpha * s;
            }
            let mut min_denom = f64::INFINITY;
            for (d, row) in trial_denom.iter_mut().zip(z.chunks_exact(dim)) {
                *d = 1.0 + row.iter().zip(&trial).map(|(a, b)| a * b).sum::<f64>();
                min_denom = min_denom.min(*d);
            }
            if min_denom >= floor {
                let trial_obj: f64 = trial_denom.iter().map(|d| d.ln()).sum();
                // Inside the quadratic-convergence region a full step is taken
                // even if rounding hides the ascent.
                let ascent = trial_obj >= obj + 1e-4 * alpha * decrement;
                if ascent || (alpha == 1.0 && decrement < 1e-2) {
                    obj = trial_obj;
                    break true;
                }
            }
            alpha *= 0.5;
            if alpha < DUAL_MIN_STEP {
                break false;
            }
        };
        if !accepted {
            if residual < 1e-8 {
                return Ok(DualSolution {
                    lambda,
                    neg2log: (2.0 * obj).max(0.0),
                    residual,
                    feasible: true,
                    iterations: iter,
                });
            }
            return Ok(DualSolution::infeasible(lambda, residual, iter));
        }
        std::mem::swap(&mut lambda, &mut trial);
        std::mem::swap(&mut denom, &mut trial_denom);

        // λᵀZ_t ≥ 0 for every row certifies that 0 is not interior to the hull.
        let separates = denom.iter().all(|d| *d >= 1.0) && denom.iter().any(|d| *d > 1.0);
        if separates {
            return Ok(DualSolution::infeasible(lambda, residual, iter + 1));
        }
    }
    let residual = {
        let mut g = vec![0.0; dim];
        for (row, &s) in z.chunks_exact(dim).zip(&denom) {
            for (gi, v) in g.iter_mut().zip(row) {
                *gi += v / s;
            }
        }
        g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    Err(Error::DualNotConverged { residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElMode {
    /// Unweighted empirical likelihood.
    El,
    /// Self-weighted empirical likelihood.
    Wel,
}

/// Result of [`profile_el_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElOutcome {
    pub mode: ElMode,
    pub m: usize,
    /// `−2 log` EL ratio at the profile optimum.
    pub stat: f64,
    pub lambda: Vec<f64>,
    pub theta_hat_el: ArmaSpec,
    pub p_value: f64,
    pub converged: bool,
    pub inner_residual: f64,
    /// Objective evaluations spent by the outer minimization.
    pub outer_iterations: usize,
}

impl ElOutcome {
    /// Reject at level `a` iff `stat ≥ χ²_m(1−a)`, i.e. `p_value ≤ a`.
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

/// Tuning for [`profile_el_test_with`].
#[derive(Debug, Clone)]
pub struct ProfileOptions {
    pub quantile_level: f64,
    /// Replaces the data-driven self-weights in WeL mode.
    pub weights: Option<SelfWeights>,
    pub max_evals: usize,
    pub value_spread: f64,
    pub restarts: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            quantile_level: DEFAULT_QUANTILE_LEVEL,
            weights: None,
            max_evals: 500,
            value_spread: 1e-6,
            restarts: 1,
        }
    }
}

/// Value of `−2 log L(θ, 0)` for a fixed θ, with λ mapped back to the raw
/// moment scale. Columns are scaled to unit RMS before the dual solve, which
/// leaves the statistic unchanged.
pub fn el_at_theta(
    theta: &ArmaSpec,
    x: &[f64],
    m: usize,
    weights: Option<&SelfWeights>,
) -> Result<DualSolution> {
    let pack = residuals_and_gradient(theta, x)?;
    let z = moment_vectors(&pack, m, weights)?;
    let mut data = z.data;
    let dim = z.dim;
    let mut scale = vec![0.0; dim];
    for row in data.chunks_exact(dim) {
        for (s, v) in scale.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    for s in scale.iter_mut() {
        *s = (*s / z.rows as f64).sqrt();
        if !(*s > 0.0) || !s.is_finite() {
            *s = 1.0;
        }
    }
    for row in data.chunks_exact_mut(dim) {
        for (v, s) in row.iter_mut().zip(&scale) {
            *v /= s;
        }
    }
    let mut sol = dual_solve_rows(&data, z.rows, dim)?;
    for (l, s) in sol.lambda.iter_mut().zip(&scale) {
        *l /= s;
    }
    Ok(sol)
}

/// Profile EL (or WeL) portmanteau test of no serial correlation up to lag `m`
/// in the residuals of an ARMA(p, q) fit.
pub fn profile_el_test(
    x: &[f64],
    p: usize,
    q: usize,
    m: usize,
    mode: ElMode,
    fit: Option<&FitResult>,
) -> Result<ElOutcome> {
    profile_el_test_with(x, p, q, m, mode, fit, &ProfileOptions::default())
}

pub fn profile_el_test_with(
    x: &[f64],
    p: usize,
    q: usize,
    m: usize,
    mode: ElMode,
    fit: Option<&FitResult>,
    opts: &ProfileOptions,
) -> Result<ElOutcome> {
    if m == 0 {
        return Err(Error::domain("number of lags m must be >= 1"));
    }
    let owned_fit;
    let fit = match fit {
        Some(f) => {
            if f.theta_hat.p() != p || f.theta_hat.q() != q {
                return Err(Error::domain("supplied fit has the wrong orders"));
            }
            f
        }
        None => {
            owned_fit = ls_fit(x, p, q, None)?;
            &owned_fit
        }
    };
    let weights = match mode {
        ElMode::El => None,
        ElMode::Wel => Some(match &opts.weights {
            Some(w) => w.clone(),
            None => self_weights(x, opts.quantile_level)?,
        }),
    };

    let n = x.len() as f64;
    let sd = {
        let mean = x.iter().sum::<f64>() / n;
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    let h = 0.5 / n.sqrt();
    let mut steps = vec![h; 1 + p + q];
    steps[0] = h * if sd > 0.0 { sd } else { 1.0 };

    let mut best: Option<(f64, DualSolution)> = None;
    let objective = |theta: &[f64]| -> f64 {
        let spec = ArmaSpec::from_vec(p, q, theta);
        if !check_stationarity(&spec).ok {
            return f64::INFINITY;
        }
        match el_at_theta(&spec, x, m, weights.as_ref()) {
            Ok(sol) if sol.feasible => {
                let v = sol.neg2log;
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, sol));
                }
                v
            }
            _ => f64::INFINITY,
        }
    };
    let nm = nelder_mead(
        objective,
        &fit.theta_hat.to_vec(),
        &steps,
        &NelderMeadOptions {
            value_spread: opts.value_spread,
            max_evals: opts.max_evals,
            restarts: opts.restarts,
        },
    );
    let Some((stat, sol)) = best else {
        return Err(Error::ElInfeasible);
    };
    debug_assert!(stat <= nm.value);
    Ok(ElOutcome {
        mode,
        m,
        stat,
        lambda: sol.lambda,
        theta_hat_el: ArmaSpec::from_vec(p, q, &nm.x),
        p_value: chi2_sf_nonneg(stat, m),
        converged: nm.converged && sol.residual < 1e-8,
        inner_residual: sol.residual,
        outer_iterations: nm.evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, DgpConfig, GarchSpec};

    #[test]
    fn weights_constant_series() {
        let w = self_weights(&[1.0, 1.0, 1.0], 0.9).unwrap();
        assert_eq!(w.m_x(), 1.0);
        let want = 1.0 + (-(2f64.ln()).powi(2)).exp() + (-(3f64.ln()).powi(2)).exp();
        assert!((w.at(3) - want).abs() < 1e-15);
        assert!((want - 1.9176).abs() < 1e-4);
        assert_eq!(w.at(0), 1.0);
    }

    #[test]
    fn weights_single_point() {
        let w = self_weights(&[5.0], 0.9).unwrap();
        assert_eq!(w.at(1), 5.0);
        let w = self_weights(&[-5.0], 0.3).unwrap();
        assert_eq!(w.at(1), 5.0);
    }

    #[test]
    fn weights_zero_series_rejected() {
        assert_eq!(self_weights(&[0.0; 10], 0.9), Err(Error::DegenerateSeries));
    }

    #[test]
    fn weights_are_causal() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let full = self_weights(&x, 0.9).unwrap();
        for k in [1, 10, 150, 299] {
            let prefix = self_weights_with_floor(&x[..k], full.m_x()).unwrap();
            assert_eq!(prefix.weights(), &full.weights()[..k]);
        }
        assert!(full.weights().iter().all(|w| *w >= full.m_x()));
    }

    #[test]
    fn moments_hand_example() {
        let pack = residuals_and_gradient(&ArmaSpec::white_noise(0.0), &[1.0, -1.0, 1.0, -1.0]).unwrap();
        let z = moment_vectors(&pack, 1, None).unwrap();
        assert_eq!((z.rows(), z.dim()), (3, 2));
        assert_eq!(z.row(0), &[-1.0 * 1.0 * -1.0 * -1.0 * -1.0, -1.0]);
        let want = [[1.0, -1.0], [-1.0, -1.0], [1.0, -1.0]];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(z.row(i), w);
        }
    }

    #[test]
    fn moments_unit_weights_match_unweighted() {
        let x: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let theta = ArmaSpec::new(0.1, vec![0.2], vec![0.3]).unwrap();
        let pack = residuals_and_gradient(&theta, &x).unwrap();
        let a = moment_vectors(&pack, 3, None).unwrap();
        let b = moment_vectors(&pack, 3, Some(&SelfWeights::unit(80))).unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(b.mode(), MomentMode::Weighted);
        assert_eq!((a.rows(), a.dim()), (77, 6));
    }

    #[test]
    fn moments_weighted_elementwise() {
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.9).cos() * (1.0 + i as f64 / 10.0)).collect();
        let theta = ArmaSpec::new(0.0, vec![0.4], vec![-0.2]).unwrap();
        let pack = residuals_and_gradient(&theta, &x).unwrap();
        let w = self_weights(&x, 0.9).unwrap();
        let m = 2;
        let z = moment_vectors(&pack, m, Some(&w)).unwrap();
        for (r, t1) in (m + 1..=x.len()).enumerate() {
            let row = z.row(r);
            let e = pack.eps[t1 - 1];
            let wp = w.at(t1 - 1);
            for c in 0..3 {
                let want = e * pack.grad_row(t1 - 1)[c] / (wp * wp);
                assert!((row[c] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
            for l in 1..=m {
                let want = e * pack.eps[t1 - 1 - l] / (wp * w.at(t1 - 1 - l));
                assert!((row[2 + l] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn moments_insufficient_sample() {
        let pack = residuals_and_gradient(&ArmaSpec::zeros(1, 1), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(matches!(moment_vectors(&pack, 2, None), Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn dual_symmetric_rows() {
        let rows = vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![0.5, -1.0], vec![-0.5, 1.0]];
        let sol = dual_solve(&MomentMatrix::from_rows(&rows).unwrap()).unwrap();
        assert!(sol.feasible);
        assert!(sol.lambda.iter().all(|l| *l == 0.0));
        assert_eq!(sol.neg2log, 0.0);
    }

    #[test]
    fn dual_infeasible_when_first_coordinate_positive() {
        let rows = vec![vec![1.0, 2.0], vec![0.5, -2.0], vec![2.0, 1.0], vec![0.1, -1.0]];
        let sol = dual_solve(&MomentMatrix::from_rows(&rows).unwrap()).unwrap();
        assert!(!sol.feasible);
        assert!(sol.neg2log.is_infinite());
    }

    /// Root of Σ z/(1+λz) by bisection on the admissible interval.
    fn scalar_oracle(z: &[f64]) -> f64 {
        let g = |l: f64| z.iter().map(|v| v / (1.0 + l * v)).sum::<f64>();
        let zmax = z.iter().cloned().fold(f64::MIN, f64::max);
        let zmin = z.iter().cloned().fold(f64::MAX, f64::min);
        let (mut lo, mut hi) = ((-1.0 / zmax) + 1e-12, (-1.0 / zmin) - 1e-12);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dual_scalar_cases_match_bisection() {
        // {2, −1, −1} has mean zero, so λ = 0.
        let sol = dual_solve(&MomentMatrix::from_rows(&[vec![2.0], vec![-1.0], vec![-1.0]]).unwrap()).unwrap();
        assert!(scalar_oracle(&[2.0, -1.0, -1.0]).abs() < 1e-12);
        assert!(sol.lambda[0].abs() < 1e-12);
        assert!(sol.neg2log.abs() < 1e-12);

        let z = [2.0, -1.0, -0.5, 0.3, -0.4];
        let sol = dual_solve(&MomentMatrix::from_rows(&z.map(|v| vec![v])).unwrap()).unwrap();
        let lam = scalar_oracle(&z);
        assert!((sol.lambda[0] - lam).abs() < 1e-9);
        let want = 2.0 * z.iter().map(|v| (1.0 + lam * v).ln()).sum::<f64>();
        assert!((sol.neg2log - want).abs() < 1e-9);
        assert!(sol.residual < 1e-8);
    }

    #[test]
    fn dual_rejects_non_finite() {
        assert!(dual_solve(&MomentMatrix::from_rows(&[vec![f64::NAN], vec![1.0]]).unwrap()).is_err());
    }

    fn null_series(seed: u64, a: f64, b: f64) -> Vec<f64> {
        simulate(&DgpConfig {
            arma: ArmaSpec::new(0.0, vec![0.3], vec![0.4]).unwrap(),
            garch: GarchSpec::new(0.2, vec![a], vec![b]).unwrap(),
            c: 0.0,
            n: 400,
            burn_in: 500,
            seed,
        })
        .unwrap()
        .into_inner()
    }

    #[test]
    fn profile_never_exceeds_start_value() {
        let x = null_series(3, 0.1, 0.15);
        let fit = ls_fit(&x, 1, 1, None).unwrap();
        for mode in [ElMode::El, ElMode::Wel] {
            let out = profile_el_test(&x, 1, 1, 2, mode, Some(&fit)).unwrap();
            let w = (mode == ElMode::Wel).then(|| self_weights(&x, 0.9).unwrap());
            let at_fit = el_at_theta(&fit.theta_hat, &x, 2, w.as_ref()).unwrap();
            assert!(out.stat <= at_fit.neg2log + 1e-12);
            assert!(out.stat >= 0.0);
            assert!(out.converged);
            assert!(out.inner_residual < 1e-8);
            assert!((out.p_value - chi2_sf_nonneg(out.stat, 2)).abs() < 1e-15);
        }
    }

    #[test]
    fn wel_with_unit_weights_equals_el() {
        let x = null_series(4, 0.1, 0.15);
        let fit = ls_fit(&x, 1, 1, None).unwrap();
        let el = profile_el_test(&x, 1, 1, 2, ElMode::El, Some(&fit)).unwrap();
        let opts = ProfileOptions { weights: Some(SelfWeights::unit(x.len())), ..Default::default() };
        let wel = profile_el_test_with(&x, 1, 1, 2, ElMode::Wel, Some(&fit), &opts).unwrap();
        assert!((el.stat - wel.stat).abs() < 1e-8, "{} vs {}", el.stat, wel.stat);
    }

    #[test]
    fn wel_scale_equivariant() {
        let x = null_series(5, 0.33, 0.66);
        let k = 7.5;
        let xk: Vec<f64> = x.iter().map(|v| v * k).collect();
        let fit = ls_fit(&x, 1, 1, None).unwrap();
        let mut fit_k = fit.clone();
        fit_k.theta_hat.mu *= k;
        let a = profile_el_test(&x, 1, 1, 2, ElMode::Wel, Some(&fit)).unwrap();
        let b = profile_el_test(&xk, 1, 1, 2, ElMode::Wel, Some(&fit_k)).unwrap();
        assert!((a.stat - b.stat).abs() < 1e-6, "{} vs {}", a.stat, b.stat);
    }
}
