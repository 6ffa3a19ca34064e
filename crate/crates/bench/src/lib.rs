//! Monte-Carlo benchmark campaigns comparing trajectory fitting with
//! Kalman, IMM, particle and observation-only estimators, plus the pieces
//! behind the `stf` command-line tool.

pub mod campaign;
pub mod config;
pub mod error;
pub mod fit_cli;
pub mod pipelines;
pub mod registry;
pub mod report;
pub mod streams;

pub use campaign::{run_campaign, run_once, CampaignReport, EstimatorRow};
pub use config::{load_config, parse_config, CampaignConfig, OutputConfig};
pub use error::{BenchError, Result};
pub use report::{emit_report, read_json_report, Format};
