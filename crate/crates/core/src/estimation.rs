//! Conditional residuals, their parameter gradients and the least-squares
//! ARMA fit.
//!
//! Residuals follow the zero-presample recursion
//! `ε_t = X_t − μ − Σ φ_i X_{t-i} − Σ ψ_j ε_{t-j}` and the gradient obeys
//! `∂ε_t/∂θ = −X̃_t − Σ ψ_j ∂ε_{t-j}/∂θ` with
//! `X̃_t = (1, X_{t-1..t-p}, ε_{t-1..t-q})`. The sum of squares is taken over
//! `t = p+1..n`, i.e. conditional on the first `p` observations.

use crate::linalg::{ols, spd_solve};
use crate::model::{check_stationarity, ArmaSpec};
use crate::{Error, Result};

const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-10;
const ARMIJO_C: f64 = 1e-4;

/// Residuals `ε_t(θ)` and the row-major `n × (p+q+1)` gradient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPack {
    pub eps: Vec<f64>,
    grad: Vec<f64>,
    dim: usize,
}

impl ResidualPack {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Number of parameters, `p + q + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `∂ε_t/∂θ` in the order `(μ, φ_1..φ_p, ψ_1..ψ_q)`.
    pub fn grad_row(&self, t: usize) -> &[f64] {
        &self.grad[t * self.dim..(t + 1) * self.dim]
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }
}

/// Residual recursion only (no gradient).
pub fn residuals(theta: &ArmaSpec, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut eps = vec![0.0; n];
    for t in 0..n {
        let mut e = x[t] - theta.mu;
        for (i, ph) in theta.phi.iter().enumerate() {
            if t > i {
                e -= ph * x[t - i - 1];
            }
        }
        for (j, ps) in theta.psi.iter().enumerate() {
            if t > j {
                e -= ps * eps[t - j - 1];
            }
        }
        eps[t] = e;
    }
    eps
}

/// Residuals together with their analytic gradient.
pub fn residuals_and_gradient(theta: &ArmaSpec, x: &[f64]) -> Result<ResidualPack> {
    let (p, q) = (theta.p(), theta.q());
    let dim = 1 + p + q;
    let n = x.len();
    if n <= p + q {
        return Err(Error::domain(format!(
            "series of length {n} too short for ARMA({p},{q})"
        )));
    }
    let eps = residuals(theta, x);
    let mut grad = vec![0.0; n * dim];
    for t in 0..n {
        let (done, rest) = grad.split_at_mut(t * dim);
        let row = &mut rest[..dim];
        row[0] = -1.0;
        for i in 0..p {
            if t > i {
                row[1 + i] = -x[t - i - 1];
            }
        }
        for j in 0..q {
            if t > j {
                row[1 + p + j] = -eps[t - j - 1];
            }
        }
        for (j, ps) in theta.psi.iter().enumerate() {
            if t > j {
                let prev = &done[(t - j - 1) * dim..(t - j) * dim];
                for (r, g) in row.iter_mut().zip(prev) {
                    *r -= ps * g;
                }
            }
        }
    }
    Ok(ResidualPack { eps, grad, dim })
}

/// Outcome of [`ls_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ArmaSpec,
    /// `‖Σ_t ε_t ∂ε_t/∂θ‖_∞` at `theta_hat`.
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of squared residuals at `theta_hat` and at the starting point.
    pub sum_squares: f64,
    pub initial_sum_squares: f64,
}

fn sum_squares(theta: &ArmaSpec, x: &[f64]) -> f64 {
    residuals(theta, x)[theta.p()..].iter().map(|e| e * e).sum()
}

/// `(JᵀJ, Jᵀε)` over the conditioning range `t ≥ p`, optionally weighted per term.
pub(crate) fn normal_equations(
    pack: &ResidualPack,
    start: usize,
    weights: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let k = pack.dim();
    let mut jtj = vec![0.0; k * k];
    let mut jte = vec![0.0; k];
    for t in start..pack.len() {
        let v = weights.map_or(1.0, |w| w[t]);
        let g = pack.grad_row(t);
        let e = pack.eps[t] * v;
        for i in 0..k {
            jte[i] += e * g[i];
            let gi = v * g[i];
            for j in 0..=i {
                jtj[i * k + j] += gi * g[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            jtj[j * k + i] = jtj[i * k + j];
        }
    }
    (jtj, jte)
}

/// Least-squares fit of ARMA(p, q) by line-searched Gauss–Newton.
///
/// Starts from `init` when given, otherwise from a Hannan–Rissanen estimate
/// pulled back into the stationary/invertible region. Iterates never leave
/// that region: a step that would is halved until it re-enters.
pub fn ls_fit(x: &[f64], p: usize, q: usize, init: Option<&ArmaSpec>) -> Result<FitResult> {
    let n = x.len();
    if n < 10 * (p + q + 1) {
        return Err(Error::domain(format!(
            "need at least {} observations for ARMA({p},{q}), got {n}",
            10 * (p + q + 1)
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    let start = match init {
        Some(s) => {
            if s.p() != p || s.q() != q {
                return Err(Error::domain("initial parameters have the wrong orders"));
            }
            s.validate()?;
            s.clone()
        }
        None => hannan_rissanen(x, p, q),
    };
    let mut theta = project_to_region(start);
    let k = theta.dim();
    let initial_ss = sum_squares(&theta, x);
    let mut ss = initial_ss;
    let mut iterations = 0;

    let score_tol = 1e-6 * n as f64;
    while iterations < MAX_ITER {
        let pack = residuals_and_gradient(&theta, x)?;
        let (jtj, jte) = normal_equations(&pack, p, None);
        let score = inf_norm(&jte);
        let rhs: Vec<f64> = jte.iter().map(|v| -v).collect();
        let step = spd_solve(&jtj, &rhs, k).ok_or(Error::DegenerateDesign)?;
        if score == 0.0 {
            break;
        }
        iterations += 1;

        let slope = 2.0 * jte.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
        let base = theta.to_vec();
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= STEP_TOL {
            let cand: Vec<f64> = base.iter().zip(&step).map(|(b, d)| b + alpha * d).collect();
            let cand = ArmaSpec::from_vec(p, q, &cand);
            if check_stationarity(&cand).ok {
                let cand_ss = sum_squares(&cand, x);
                if cand_ss <= ss + ARMIJO_C * alpha * slope {
                    accepted = Some((cand, cand_ss));
                    break;
                }
            }
            alpha *= 0.5;
        }
        // Near the optimum of a large-scale series the decrease in the sum of
        // squares drops below rounding; fall back to a step that
        // still reduces the score norm.
        let accepted = accepted.or_else(|| {
            alpha = 1.0;
            while alpha >= 1e-3 {
                let cand: Vec<f64> = base.iter().zip(&step).map(|(b, d)| b + alpha * d).collect();
                let cand = ArmaSpec::from_vec(p, q, &cand);
                if check_stationarity(&cand).ok {
                    let cand_pack = residuals_and_gradient(&cand, x).ok()?;
                    let (_, cand_jte) = normal_equations(&cand_pack, p, None);
                    if inf_norm(&cand_jte) < score {
                        let cand_ss = sum_squares(&cand, x);
                        return Some((cand, cand_ss));
                    }
                }
                alpha *= 0.5;
            }
            None
        });
        let Some((cand, cand_ss)) = accepted else { break };
        let step_norm = step.iter().fold(0.0f64, |m, d| m.max((alpha * d).abs()));
        let scale = 1.0 + base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let improvement = ss - cand_ss;
        theta = cand;
        ss = cand_ss;
        if step_norm < STEP_TOL * scale || (improvement <= 1e-15 * ss && score < score_tol) {
            break;
        }
    }

    let mut score_norm = score_at(&theta, x)?;
    if score_norm >= score_tol {
        let (polished, polished_ss, polished_score, extra) = newton_polish(theta, x, ss, score_norm, score_tol)?;
        theta = polished;
        ss = polished_ss;
        score_norm = polished_score;
        iterations += extra;
    }
    Ok(FitResult {
        converged: score_norm < score_tol,
        theta_hat: theta,
        score_norm,
        iterations,
        sum_squares: ss,
        initial_sum_squares: initial_ss,
    })
}

fn score_at(theta: &ArmaSpec, x: &[f64]) -> Result<f64> {
    let pack = residuals_and_gradient(theta, x)?;
    Ok(inf_norm(&normal_equations(&pack, theta.p(), None).1))
}

/// Newton iterations on the score with a finite-difference Hessian.
///
/// Gauss–Newton drops the `Σ ε_t ∂²ε_t` term of the Hessian, which is not
/// small for heavy-tailed residuals; there it can creep towards the optimum
/// at a linear rate close to one. Steps are accepted when they reduce the
/// score norm without raising the sum of squares beyond rounding.
fn newton_polish(
    mut theta: ArmaSpec,
    x: &[f64],
    mut ss: f64,
    mut score: f64,
    score_tol: f64,
) -> Result<(ArmaSpec, f64, f64, usize)> {
    const POLISH_ITER: usize = 50;
    let (p, q) = (theta.p(), theta.q());
    let k = theta.dim();
    let score_vec = |t: &ArmaSpec| -> Result<Vec<f64>> {
        let pack = residuals_and_gradient(t, x)?;
        Ok(normal_equations(&pack, p, None).1)
    };
    let mut iterations = 0;
    while iterations < POLISH_ITER && score >= score_tol * 1e-3 {
        iterations += 1;
        let base = theta.to_vec();
        let g = score_vec(&theta)?;
        let mut hess = vec![0.0; k * k];
        for j in 0..k {
            let h = 1e-6 * base[j].abs().max(1.0);
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[j] += h;
            minus[j] -= h;
            let gp = score_vec(&ArmaSpec::from_vec(p, q, &plus))?;
            let gm = score_vec(&ArmaSpec::from_vec(p, q, &minus))?;
            for i in 0..k {
                hess[i * k + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for i in 0..k {
            for j in 0..i {
                let avg = 0.5 * (hess[i * k + j] + hess[j * k + i]);
                hess[i * k + j] = avg;
                hess[j * k + i] = avg;
            }
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(step) = spd_solve(&hess, &rhs, k) else { break };
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-4 {
            let cand: Vec<f64> = base.iter().zip(&step).map(|(b, d)| b + alpha * d).collect();
            let cand = ArmaSpec::from_vec(p, q, &cand);
            if check_stationarity(&cand).ok {
                let cand_ss = sum_squares(&cand, x);
                if cand_ss <= ss * (1.0 + 1e-12) {
                    let cand_score = score_at(&cand, x)?;
                    if cand_score < score {
                        accepted = Some((cand, cand_ss, cand_score));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, cand_ss, cand_score)) = accepted else { break };
        theta = cand;
        ss = cand_ss.min(ss);
        score = cand_score;
    }
    Ok((theta, ss, score, iterations))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Shrink AR/MA coefficients toward zero until the roots clear the unit circle.
fn project_to_region(mut theta: ArmaSpec) -> ArmaSpec {
    for _ in 0..60 {
        if check_stationarity(&theta).ok {
            return theta;
        }
        theta.phi.iter_mut().chain(theta.psi.iter_mut()).for_each(|v| *v *= 0.5);
    }
    ArmaSpec { mu: theta.mu, phi: vec![0.0; theta.p()], psi: vec![0.0; theta.q()] }
}

/// Long-AR residual proxy followed by a linear regression on lagged X and
/// lagged proxy residuals. Falls back to zero coefficients around the sample
/// mean if either regression is degenerate.
fn hannan_rissanen(x: &[f64], p: usize, q: usize) -> ArmaSpec {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let fallback = ArmaSpec { mu: mean, phi: vec![0.0; p], psi: vec![0.0; q] };
    if q == 0 {
        return match lagged_regression(x, &[(x, p)], p) {
            Some(coef) => ArmaSpec { mu: coef[0], phi: coef[1..].to_vec(), psi: Vec::new() },
            None => fallback,
        };
    }

    let h = ((10.0 * (n as f64).log10()).ceil() as usize).max(p + q + 1).min(n / 4);
    let Some(coef) = lagged_regression(x, &[(x, h)], h) else {
        return fallback;
    };
    let mut proxy = vec![0.0; n];
    for t in h..n {
        let fit: f64 = coef[0] + (1..=h).map(|i| coef[i] * x[t - i]).sum::<f64>();
        proxy[t] = x[t] - fit;
    }
    match lagged_regression(x, &[(x, p), (&proxy, q)], h + q) {
        Some(coef) => ArmaSpec {
            mu: coef[0],
            phi: coef[1..1 + p].to_vec(),
            psi: coef[1 + p..].to_vec(),
        },
        None => fallback,
    }
}

/// Regress `y_t` on `(1, s_{t-1..t-lag} for each (s, lag))` over `t ≥ first`.
fn lagged_regression(y: &[f64], regressors: &[(&[f64], usize)], first: usize) -> Option<Vec<f64>> {
    let k = 1 + regressors.iter().map(|(_, l)| l).sum::<usize>();
    let mut design = Vec::with_capacity((y.len() - first) * k);
    for t in first..y.len() {
        design.push(1.0);
        for (s, lags) in regressors {
            for i in 1..=*lags {
                design.push(s[t - i]);
            }
        }
    }
    ols(&design, &y[first..], k).map(|f| f.coef)
}
