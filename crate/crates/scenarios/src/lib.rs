//! The three benchmark scenarios: a linear maneuvering target, a
//! bearings-only maneuvering target, and a vertically falling body
//! observed by range.

pub mod angles;
pub mod ballistic;
pub mod bearings;
pub mod error;
pub mod export;
pub mod linear;
pub mod metrics;

pub use error::{Result, ScenarioError};
pub use metrics::{rmse, EstimateSeries, RmseSeries, RunResult};
