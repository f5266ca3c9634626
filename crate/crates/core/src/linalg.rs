use nalgebra::{DMatrix, DVector};

/// Solve `A x = b` for symmetric positive definite `A` (row-major, `k×k`).
pub(crate) fn spd_solve(a: &[f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(k, k, a);
    let chol = m.cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(b));
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Ordinary least squares fit of `y` on the rows of `design` (row-major,
/// `rows × k`), via the normal equations.
pub(crate) struct Ols {
    pub coef: Vec<f64>,
    pub fitted: Vec<f64>,
}

pub(crate) fn ols(design: &[f64], y: &[f64], k: usize) -> Option<Ols> {
    let rows = y.len();
    debug_assert_eq!(design.len(), rows * k);
    if rows < k {
        return None;
    }
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for (row, &yi) in design.chunks_exact(k).zip(y) {
        for i in 0..k {
            xty[i] += row[i] * yi;
            for j in 0..=i {
                xtx[i * k + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[j * k + i] = xtx[i * k + j];
        }
    }
    // Reject numerically rank-deficient designs before Cholesky quietly succeeds on them.
    let m = DMatrix::from_row_slice(k, k, &xtx);
    let sv = m.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin <= smax * 1e-13 {
        return None;
    }
    let coef = spd_solve(&xtx, &xty, k)?;
    let fitted = design
        .chunks_exact(k)
        .map(|row| row.iter().zip(&coef).map(|(a, b)| a * b).sum())
        .collect();
    Some(Ols { coef, fitted })
}
