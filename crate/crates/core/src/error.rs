use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("ARMA parameters violate stationarity/invertibility (min |root| AR {ar:.6}, MA {ma:.6}, common root: {common})")]
    NonStationary { ar: f64, ma: f64, common: bool },

    #[error("simulation failed: non-finite value at index {index}")]
    SimulationFailed { index: usize },

    #[error("degenerate design")]
    DegenerateDesign,

    #[error("insufficient sample for m lags (rows {rows}, moment dimension {dim})")]
    InsufficientSample { rows: usize, dim: usize },

    #[error("degenerate series: M_X = 0 violates inf w_t > 0")]
    DegenerateSeries,

    #[error("zero-energy residuals")]
    ZeroEnergy,

    #[error("weight denominator nonpositive")]
    WeightDenominator,

    #[error("dual solver did not converge (residual {residual:e})")]
    DualNotConverged { residual: f64 },

    #[error("EL infeasible at every trial point")]
    ElInfeasible,

    #[error("fit did not converge")]
    FitNotConverged,

    #[error("too many bootstrap replicates skipped ({skipped} of {total})")]
    TooManySkipped { skipped: usize, total: usize },

    #[error("overflow in matrix product at step {step}")]
    Overflow { step: usize },

    #[error("collinear design")]
    CollinearDesign,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
