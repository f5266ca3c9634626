//! Empirical-likelihood portmanteau tests for ARMA models whose errors may
//! follow a GARCH process with infinite variance.
//!
//! The crate is organised bottom-up:
//!
//! - [`stats_util`]: chi-squared tail probabilities, empirical quantiles and
//!   seed derivation.
//! - [`model`]: ARMA/GARCH parameter records, root-based stationarity checks
//!   and the simulation DGP (including the MA(1)-in-innovation local
//!   alternative).
//! - [`estimation`]: conditional residual recursion with analytic gradients
//!   and the Gauss–Newton least-squares fit.
//! - [`el`]: self-weights, moment vectors, the Lagrange dual solver and the
//!   profile EL / weighted EL test statistics.
//! - [`classic`]: Box–Pierce, Ljung–Box and the random-weight bootstrap.
//! - [`diagnostics`]: Lyapunov exponent of the GARCH companion product, the
//!   weight-moment proxy and the ARCH-LM test.
//! - [`harness`]: Monte Carlo size/power experiments and table output.

pub mod classic;
pub mod diagnostics;
pub mod el;
mod error;
pub mod estimation;
pub mod harness;
mod linalg;
pub mod model;
mod optim;
pub mod stats_util;

pub use error::{Error, Result};
