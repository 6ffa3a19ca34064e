use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("invalid campaign: {0}")]
    Invalid(String),

    #[error("unknown estimator `{name}` for scenario {scenario}; available: {available}")]
    UnknownEstimator { name: String, scenario: u8, available: String },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Fit(#[from] stf_core::error::StfError),

    #[error(transparent)]
    Filter(#[from] stf_baselines::BaselineError),

    #[error(transparent)]
    Scenario(#[from] stf_scenarios::ScenarioError),
}

impl BenchError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
