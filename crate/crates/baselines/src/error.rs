use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,

    #[error("predicted covariance is singular at step {step}")]
    SingularPredicted { step: usize },

    #[error("model undefined: {0}")]
    Undefined(String),

    #[error("covariance square root failed for {covariance}")]
    Factorization { covariance: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, BaselineError>;
