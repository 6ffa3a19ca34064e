//! Windowed data-fitting objectives and their solvers.

mod linear;
mod lm;
mod rls;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StfError};
use crate::trajectory::{BasisSpec, FotParams, TimeWindow};

pub use linear::linear_ls_fit;
pub use lm::{levenberg_marquardt, nonlinear_ls_fit, LmOptions, LmOutcome};
pub use rls::{recursive_ls_update, RlsState, RlsUpdate};

/// Sensor id reserved for pseudo-observations of the state itself (hot-start
/// anchors). Such observations bypass the observation model.
pub const STATE_ANCHOR: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub sensor_id: u32,
    pub value: DVector<f64>,
    pub weight: f64,
}

impl Observation {
    pub fn new(time: f64, sensor_id: u32, value: DVector<f64>) -> Self {
        Self { time, sensor_id, value, weight: 1.0 }
    }

    pub fn scalar(time: f64, sensor_id: u32, value: f64) -> Self {
        Self::new(time, sensor_id, DVector::from_element(1, value))
    }

    pub fn anchor(time: f64, state: DVector<f64>) -> Self {
        Self::new(time, STATE_ANCHOR, state)
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn is_anchor(&self) -> bool {
        self.sensor_id == STATE_ANCHOR
    }

    pub fn validate(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(StfError::NonFinite("observation time"));
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(StfError::InvalidConfig(format!(
                "observation weight {} must be finite and nonnegative",
                self.weight
            )));
        }
        Ok(())
    }
}

/// Maps a trajectory state to the observation a sensor would report.
pub trait ObservationModel: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Noise-free observation of `state` by `sensor_id` at `time`. An `Err`
    /// carries the reason the model is undefined there.
    fn predict(&self, state: &DVector<f64>, sensor_id: u32, time: f64) -> std::result::Result<DVector<f64>, String>;

    /// Analytic Jacobian of [`ObservationModel::predict`] with respect to the
    /// state. `None` makes the solver fall back to finite differences.
    fn state_jacobian(
        &self,
        _state: &DVector<f64>,
        _sensor_id: u32,
        _time: f64,
    ) -> Option<std::result::Result<DMatrix<f64>, String>> {
        None
    }

    /// Discrepancy `y - predicted`; angular models wrap it.
    fn innovation(&self, y: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        y - predicted
    }

    /// True when the observation is the state itself.
    fn is_identity(&self) -> bool {
        false
    }

    /// Inverts a single observation into state space when the model allows it.
    fn project(&self, _y: &DVector<f64>, _sensor_id: u32) -> Option<DVector<f64>> {
        None
    }
}

/// Direct observation of a `dims`-dimensional state.
#[derive(Debug, Clone, Copy)]
pub struct IdentityModel {
    pub dims: usize,
}

impl IdentityModel {
    pub fn new(dims: usize) -> Self {
        Self { dims }
    }
}

impl ObservationModel for IdentityModel {
    fn state_dim(&self) -> usize {
        self.dims
    }

    fn predict(&self, state: &DVector<f64>, _sensor_id: u32, _time: f64) -> std::result::Result<DVector<f64>, String> {
        Ok(state.clone())
    }

    fn state_jacobian(
        &self,
        _state: &DVector<f64>,
        _sensor_id: u32,
        _time: f64,
    ) -> Option<std::result::Result<DMatrix<f64>, String>> {
        Some(Ok(DMatrix::identity(self.dims, self.dims)))
    }

    fn is_identity(&self) -> bool {
        true
    }

    fn project(&self, y: &DVector<f64>, _sensor_id: u32) -> Option<DVector<f64>> {
        Some(y.clone())
    }
}

/// Soft constraint pulling the trajectory through `state` at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub time: f64,
    pub state: DVector<f64>,
    pub trade_off: f64,
}

#[derive(Clone)]
pub struct ResidualSpec {
    pub model: Arc<dyn ObservationModel>,
    /// Known observation-noise mean, added to every prediction.
    pub noise_mean: Option<DVector<f64>>,
    /// Geometric down-weighting of older data, in (0, 1].
    pub fading: f64,
    /// Time span over which one factor of `fading` is applied.
    pub fading_interval: f64,
    pub penalty: Option<Penalty>,
}

impl fmt::Debug for ResidualSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResidualSpec")
            .field("state_dim", &self.model.state_dim())
            .field("noise_mean", &self.noise_mean)
            .field("fading", &self.fading)
            .field("fading_interval", &self.fading_interval)
            .field("penalty", &self.penalty)
            .finish()
    }
}

impl ResidualSpec {
    pub fn new(model: Arc<dyn ObservationModel>) -> Self {
        Self { model, noise_mean: None, fading: 1.0, fading_interval: 1.0, penalty: None }
    }

    pub fn identity(dims: usize) -> Self {
        Self::new(Arc::new(IdentityModel::new(dims)))
    }

    pub fn with_fading(mut self, fading: f64, interval: f64) -> Self {
        self.fading = fading;
        self.fading_interval = interval;
        self
    }

    pub fn with_noise_mean(mut self, mean: DVector<f64>) -> Self {
        self.noise_mean = Some(mean);
        self
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = Some(penalty);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fading > 0.0 && self.fading <= 1.0) {
            return Err(StfError::InvalidConfig(format!("fading factor {} outside (0, 1]", self.fading)));
        }
        if !(self.fading_interval > 0.0) {
            return Err(StfError::InvalidConfig("fading interval must be positive".into()));
        }
        if let Some(p) = &self.penalty {
            if !(p.trade_off >= 0.0) {
                return Err(StfError::InvalidConfig("penalty trade-off must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Predicted observation including the noise-mean compensation.
    pub fn predicted(&self, state: &DVector<f64>, obs: &Observation) -> Result<DVector<f64>> {
        if obs.is_anchor() {
            return Ok(state.clone());
        }
        let mut y = self
            .model
            .predict(state, obs.sensor_id, obs.time)
            .map_err(|reason| StfError::Evaluation { time: obs.time, reason })?;
        if let Some(mean) = &self.noise_mean {
            y += mean;
        }
        Ok(y)
    }

    pub fn innovation(&self, state: &DVector<f64>, obs: &Observation) -> Result<DVector<f64>> {
        let predicted = self.predicted(state, obs)?;
        if obs.is_anchor() {
            Ok(&obs.value - predicted)
        } else {
            Ok(self.model.innovation(&obs.value, &predicted))
        }
    }
}

/// Squared discrepancy between an observation and the observation predicted
/// from the trajectory at the same time.
pub fn residual_l2(params: &FotParams, obs: &Observation, spec: &ResidualSpec) -> Result<f64> {
    if !obs.time.is_finite() {
        return Err(StfError::NonFinite("observation time"));
    }
    let state = params.state_at(obs.time);
    Ok(spec.innovation(&state, obs)?.norm_squared())
}

/// A windowed fitting objective.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub window: TimeWindow,
    pub observations: Vec<Observation>,
    pub spec: ResidualSpec,
    pub basis: BasisSpec,
    /// Per-coefficient box, flattened dimension-major like [`FotParams::flatten`].
    pub bounds: Option<Vec<(f64, f64)>>,
    pub initial_params: Option<FotParams>,
    pub options: LmOptions,
}

impl FitProblem {
    /// Builds a problem whose window spans the given observations.
    pub fn new(observations: Vec<Observation>, spec: ResidualSpec, basis: BasisSpec) -> Result<Self> {
        let (k1, k2) =
            span(&observations).ok_or(StfError::InvalidConfig("a fit needs at least one observation".into()))?;
        let window = TimeWindow::new(k1, k2, observations.len())?;
        Ok(Self {
            window,
            observations,
            spec,
            basis,
            bounds: None,
            initial_params: None,
            options: LmOptions::default(),
        })
    }

    pub fn with_initial(mut self, params: FotParams) -> Self {
        self.initial_params = Some(params);
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn dims(&self) -> usize {
        self.spec.model.state_dim()
    }

    pub fn t_ref(&self) -> f64 {
        self.window.midpoint()
    }

    pub fn distinct_times(&self) -> usize {
        distinct_times(&self.observations)
    }

    fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        for obs in &self.observations {
            obs.validate()?;
        }
        Ok(())
    }

    /// Normalized weights `w_t * fading^((k2 - t)/interval)`, summing to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let k2 = self.window.k2;
        let raw: Vec<f64> = self
            .observations
            .iter()
            .map(|o| o.weight * self.spec.fading.powf((k2 - o.time) / self.spec.fading_interval))
            .collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(StfError::ZeroWeights);
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    /// Weighted residual vector whose squared norm is the objective.
    pub(crate) fn residual_vector(&self, params: &FotParams, weights: &[f64]) -> Result<DVector<f64>> {
        let mut out = Vec::new();
        for (obs, w) in self.observations.iter().zip(weights) {
            let state = params.state_at(obs.time);
            let r = self.spec.innovation(&state, obs)?;
            let sw = w.sqrt();
            out.extend(r.iter().map(|v| sw * v));
        }
        if let Some(p) = &self.spec.penalty {
            let s = p.trade_off.sqrt();
            let diff = params.state_at(p.time) - &p.state;
            out.extend(diff.iter().map(|v| s * v));
        }
        Ok(DVector::from_vec(out))
    }
}

/// `sum_t w~_t * ||y_t - h(F(t))||^2 + trade_off * ||F(t0) - x0||^2`.
pub fn weighted_objective(problem: &FitProblem, params: &FotParams) -> Result<f64> {
    if problem.observations.is_empty() {
        return Err(StfError::InvalidConfig("empty window".into()));
    }
    let weights = problem.normalized_weights()?;
    let mut total = 0.0;
    for (obs, w) in problem.observations.iter().zip(&weights) {
        total += w * residual_l2(params, obs, &problem.spec)?;
    }
    if let Some(p) = &problem.spec.penalty {
        total += p.trade_off * (params.state_at(p.time) - &p.state).norm_squared();
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: FotParams,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub condition_warning: bool,
}

/// Initial coefficients for a fit: the previous window's trajectory moved to
/// the new reference time, or a cold-start guess from projected observations.
pub fn warm_start_seed(previous: Option<&FotParams>, window: &TimeWindow, problem: &FitProblem) -> FotParams {
    let t_ref = window.midpoint();
    let valid = (window.k1, window.k2);
    if let Some(prev) = previous {
        return prev.recentered(t_ref).with_window(valid);
    }
    let dims = problem.dims();
    let model = &problem.spec.model;
    let projected: Vec<Observation> = problem
        .observations
        .iter()
        .filter_map(|o| {
            if o.is_anchor() {
                Some(o.clone())
            } else {
                model.project(&o.value, o.sensor_id).map(|mut state| {
                    if let Some(mean) = &problem.spec.noise_mean {
                        if mean.len() == state.len() && model.is_identity() {
                            state -= mean;
                        }
                    }
                    Observation { value: state, ..o.clone() }
                })
            }
        })
        .collect();
    let m = problem.basis.order();
    if distinct_times(&projected) >= m {
        let lin = FitProblem {
            window: *window,
            observations: projected.clone(),
            spec: ResidualSpec::identity(dims),
            basis: problem.basis.clone(),
            bounds: None,
            initial_params: None,
            options: problem.options,
        };
        if let Ok(fit) = linear_ls_fit(&lin) {
            return fit.params;
        }
    }
    let mut seed = FotParams::zeros(dims, problem.basis.clone(), t_ref, valid);
    if let Some(first) = projected.first() {
        // Constant term only: tau^0, sin/cos phases and custom bases all
        // evaluate their first term, so this is a reasonable level guess.
        let phi0 = problem.basis.basis_vector(first.time, t_ref)[0];
        if phi0.abs() > 1e-12 {
            for (d, c) in seed.coeffs.iter_mut().enumerate() {
                c[0] = first.value[d] / phi0;
            }
        }
    }
    seed
}

pub(crate) fn span(observations: &[Observation]) -> Option<(f64, f64)> {
    let mut it = observations.iter().map(|o| o.time);
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
}

pub(crate) fn distinct_times(observations: &[Observation]) -> usize {
    let mut times: Vec<f64> = observations.iter().map(|o| o.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.len()
}
