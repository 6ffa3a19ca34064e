use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StfError {
    #[error("rank deficient fit: {distinct} distinct times for {required} coefficients")]
    RankDeficient { distinct: usize, required: usize },

    #[error("all observation weights are zero")]
    ZeroWeights,

    #[error("observation model undefined at t={time}: {reason}")]
    Evaluation { time: f64, reason: String },

    #[error("no trajectory has been fitted yet")]
    NoFit,

    #[error("record of {len} estimates is shorter than the order {required}")]
    ShortRecord { len: usize, required: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, StfError>;
