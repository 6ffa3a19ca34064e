//! Reference estimators for the benchmark scenarios.
//!
//! Every step function is a value-to-value transformation: beliefs go in,
//! new beliefs come out. Linear and nonlinear models share one code path
//! through the [`Dynamics`] and [`Measurement`] traits, so a KF step is an
//! EKF step on a linear model.

pub mod belief;
pub mod error;
pub mod imm;
pub mod kalman;
pub mod models;
pub mod o2;
pub mod particle;
pub mod ukf;

pub use belief::GaussianBelief;
pub use error::{BaselineError, Result};
pub use imm::{
    imm_forecast, imm_smooth, imm_smooth_two_filter, imm_step, FilterKind, ImmBank, ImmFilter, ImmModel, ImmRecord,
};
pub use kalman::{ekf_predict, ekf_step, ekf_update, kf_step, rts_smooth, ForwardPass, StepRecord};
pub use models::{Dynamics, LinearGaussianModel, Measurement};
pub use o2::{o2_debias, o2_triangulate, Branch, FallingTriangulator};
pub use particle::{pf_step, Likelihood, ParticleSet, PfStep};
pub use ukf::{ukf_predict, ukf_step, ukf_update, urts_smooth, SigmaParams};
