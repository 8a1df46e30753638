use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative clearance: total variance {total:e} A² is below electronic variance {electronic:e} A²")]
    NegativeClearance { total: f64, electronic: f64 },

    #[error("demodulation failed: {0}")]
    Demodulation(String),

    #[error("sensitivity search failed: {0}")]
    SearchFailure(String),

    #[error("covariance matrix is not physical: {0}")]
    CovarianceValidity(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("calibration failed: worst anchor `{anchor}` misses by {residual:.3} (limit {limit:.3})")]
    Calibration {
        anchor: String,
        residual: f64,
        limit: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
