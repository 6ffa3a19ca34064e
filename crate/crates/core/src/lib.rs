//! Trajectory function-of-time (FoT) fitting.
//!
//! A target's directly-observed state is modelled as a deterministic,
//! linearly-parameterized function of time fitted to a sliding window of
//! sensor data. One fitted function answers smoothing (past), tracking
//! (present) and forecasting (future) queries.
//!
//! * [`trajectory`] - basis functions, evaluation, derivatives, re-centering.
//! * [`fitting`] - weighted objectives, linear and damped nonlinear least
//!   squares, warm starts, recursive least squares.
//! * [`inference`] - the sliding-window tracker and its query modes.

pub mod error;
pub mod fitting;
pub mod inference;
pub mod trajectory;

pub use error::{Result, StfError};
pub use fitting::{
    FitProblem, FitResult, IdentityModel, Observation, ObservationModel, Penalty, ResidualSpec, STATE_ANCHOR,
};
pub use inference::{smoothed_pass, QueryMode, StfConfig, StfOutput, Tracker};
pub use trajectory::{BasisKind, BasisSpec, Evaluation, FotParams, MotionClass, TimeWindow};
