use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("velocity is zero at t = {time}; the drag coefficient is undefined")]
    ZeroVelocity { time: f64 },

    #[error(transparent)]
    Fit(#[from] stf_core::error::StfError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;
