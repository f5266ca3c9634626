//! Derivative-free Nelder–Mead minimizer used for the profile over θ.

#[derive(Debug, Clone)]
pub(crate) struct NelderMeadOptions {
    /// Stop once `max f − min f` over the simplex is below this.
    pub value_spread: f64,
    pub max_evals: usize,
    /// Number of restarts from the best vertex after convergence.
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` from the simplex `x0, x0 + steps[i]·e_i`. Non-finite values
/// are treated as +∞. `steps` must be nonzero.
pub(crate) fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut total_evals = 0;
    let mut start = x0.to_vec();
    let mut start_value: Option<f64> = None;
    let mut best = Minimum { x: x0.to_vec(), value: f64::INFINITY, evals: 0, converged: false };

    for _ in 0..=opts.restarts {
        let mut evals = 0;
        let (x, v, converged) = run(&mut eval, &start, start_value, steps, opts, &mut evals);
        total_evals += evals;
        if v <= best.value {
            best.x = x;
            best.value = v;
        }
        best.converged = converged;
        start = best.x.clone();
        start_value = Some(best.value);
    }
    best.evals = total_evals;
    best
}

fn run(
    eval: &mut impl FnMut(&[f64], &mut usize) -> f64,
    x0: &[f64],
    f0: Option<f64>,
    steps: &[f64],
    opts: &NelderMeadOptions,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = f0.unwrap_or_else(|| eval(x0, evals));
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, evals);
        simplex.push((x, v));
    }

    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[dim].1);
        if lo.is_finite() && hi - lo < opts.value_spread {
            converged = true;
            break;
        }
        if *evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let toward = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + coef * (w - c)).collect()
        };

        let worst = simplex[dim].0.clone();
        let second_worst = simplex[dim - 1].1;
        let xr = toward(-1.0, &worst);
        let fr = eval(&xr, evals);
        if fr < lo {
            let xe = toward(-2.0, &worst);
            let fe = eval(&xe, evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[dim] = (xr, fr);
            continue;
        }
        // Outside contraction when the reflection beat the worst point, inside otherwise.
        let (xc, fc, accept) = if fr < hi {
            let xc = toward(-0.5, &worst);
            let fc = eval(&xc, evals);
            (xc, fc, fc <= fr)
        } else {
            let xc = toward(0.5, &worst);
            let fc = eval(&xc, evals);
            (xc, fc, fc < hi)
        };
        if accept {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            let v = eval(&x, evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, converged)
}
