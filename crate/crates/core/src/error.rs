use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {value} lies outside the clip interval [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("M-function recursion overflowed at order {order} (alpha = {alpha})")]
    Overflow { order: usize, alpha: f64 },

    #[error("adaptive quadrature did not converge after {subdivisions} subdivisions (estimate {estimate}, error {error})")]
    QuadratureDiverged {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
