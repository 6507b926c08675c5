use thiserror::Error;

/// Errors raised by scenario construction, channel generation and equalization.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LisError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("panel layout rejected: {0}")]
    Layout(String),

    #[error("user placement rejected: {0}")]
    Placement(String),

    #[error("zero distance between antenna {antenna} and user {user}")]
    ZeroDistance { antenna: usize, user: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular Gramian (reciprocal condition number {rcond:e} below {threshold:e})")]
    SingularGramian { rcond: f64, threshold: f64 },

    #[error("channel set has zero average power")]
    ZeroPower,

    #[error("cycle model fit rejected for `{op}`: {reason}")]
    CycleFit { op: String, reason: String },

    #[error("empty daisy chain")]
    EmptyChain,

    #[error("malformed aggregation message: {0}")]
    Wire(String),
}

pub type Result<T> = std::result::Result<T, LisError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LisError {
    LisError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
