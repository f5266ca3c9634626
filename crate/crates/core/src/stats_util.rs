//! Shared numerical primitives: chi-squared tails and quantiles, empirical
//! quantiles, a KS distance helper and deterministic seed derivation.

use statrs::function::gamma::checked_gamma_ur;

use crate::{Error, Result};

/// Upper-tail probability `P(χ²_df > x)`.
///
/// Backed by the regularized upper incomplete gamma function `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("chi-squared degrees of freedom must be >= 1"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    Ok(chi2_sf_nonneg(x, df))
}

/// `chi2_sf` for arguments already known to be valid.
pub(crate) fn chi2_sf_nonneg(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    checked_gamma_ur(df as f64 / 2.0, x / 2.0)
        .unwrap_or(0.0)
        .clamp(0.0, 1.0)
}

/// Chi-squared distribution function.
pub fn chi2_cdf(x: f64, df: usize) -> Result<f64> {
    chi2_sf(x, df).map(|q| 1.0 - q)
}

/// Quantile of the chi-squared distribution: the `x` with `P(χ²_df ≤ x) = p`.
pub fn chi2_quantile(p: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("chi-squared degrees of freedom must be >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {p}")));
    }
    let target = 1.0 - p;
    // Bracket, then bisect down to adjacent floats.
    let mut lo = 0.0;
    let mut hi = (df as f64).max(1.0);
    while chi2_sf_nonneg(hi, df) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_sf_nonneg(mid, df) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nearest-rank sample quantile: the `⌈level·n⌉`-th order statistic.
pub fn empirical_quantile(xs: &[f64], level: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::domain("empirical quantile of an empty sample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {level}")));
    }
    let n = xs.len();
    // The small offset keeps products such as 0.9 * 30 from rounding up a rank.
    let rank = ((level * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut work = xs.to_vec();
    let (_, kth, _) = work.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*kth)
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and a continuous distribution function.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A root seed plus a path of integers (experiment, replication, purpose, ...)
/// that is hashed into an independent child seed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedPath {
    pub root: u64,
    pub path: Vec<u64>,
}

impl SeedPath {
    pub fn new(root: u64) -> Self {
        Self { root, path: Vec::new() }
    }

    pub fn with_path(root: u64, path: &[u64]) -> Self {
        Self { root, path: path.to_vec() }
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self { root: self.root, path }
    }

    /// Hash the root and path into a 64-bit seed.
    pub fn seed(&self) -> u64 {
        let mut h = splitmix64(self.root);
        for (depth, &p) in self.path.iter().enumerate() {
            let salt = (depth as u64 + 1).wrapping_mul(GOLDEN_GAMMA);
            h = splitmix64(h ^ splitmix64(p ^ salt));
        }
        // Length tag separates [a] from [a, 0].
        splitmix64(h ^ (self.path.len() as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
    }
}
