//! Sliding-window tracker answering delayed, online, forecast and smoothed
//! state queries from one fitted trajectory.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StfError};
use crate::fitting::{
    linear_ls_fit, nonlinear_ls_fit, warm_start_seed, FitProblem, FitResult, Observation, ResidualSpec,
};
use crate::trajectory::{BasisSpec, FotParams, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Delayed,
    Online,
    Forecast,
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StfConfig {
    /// Number of distinct sample times kept in the window.
    pub window_count: usize,
    /// Optional cap on `k2 - k1`, in seconds.
    pub max_span: Option<f64>,
    /// Number of basis terms.
    pub order: usize,
    pub delay_steps: usize,
    pub horizon_steps: usize,
    /// Nominal sampling interval used for the default query offsets.
    pub nominal_interval: f64,
}

impl Default for StfConfig {
    fn default() -> Self {
        Self { window_count: 10, max_span: None, order: 2, delay_steps: 5, horizon_steps: 5, nominal_interval: 0.1 }
    }
}

impl StfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(StfError::InvalidConfig("order must be at least 1".into()));
        }
        if self.window_count < self.order {
            return Err(StfError::InvalidConfig(format!(
                "window_count {} is smaller than the order {}",
                self.window_count, self.order
            )));
        }
        if self.horizon_steps == 0 {
            return Err(StfError::InvalidConfig("horizon_steps must be at least 1".into()));
        }
        if !(self.nominal_interval > 0.0) {
            return Err(StfError::InvalidConfig("nominal_interval must be positive".into()));
        }
        if let Some(span) = self.max_span {
            if !(span > 0.0) {
                return Err(StfError::InvalidConfig("max_span must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StfOutput {
    pub query_time: f64,
    pub estimate: DVector<f64>,
    pub mode: QueryMode,
    /// True when the query time lies outside the buffered sample span.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PushOutcome {
    /// An observation with the same time and sensor was replaced.
    pub replaced: bool,
    /// A new trajectory was fitted.
    pub refitted: bool,
}

/// Single-stream sliding-window fitter.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: StfConfig,
    spec: ResidualSpec,
    basis: BasisSpec,
    buffer: Vec<Observation>,
    current: Option<FitResult>,
    warm: Option<FotParams>,
}

impl Tracker {
    pub fn new(config: StfConfig, spec: ResidualSpec) -> Result<Self> {
        let basis = BasisSpec::monomial(config.order.max(1));
        Self::with_basis(config, spec, basis)
    }

    pub fn with_basis(config: StfConfig, spec: ResidualSpec, basis: BasisSpec) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        if basis.order() != config.order {
            return Err(StfError::InvalidConfig(format!(
                "basis order {} differs from configured order {}",
                basis.order(),
                config.order
            )));
        }
        Ok(Self { config, spec, basis, buffer: Vec::new(), current: None, warm: None })
    }

    /// Seeds the first nonlinear fit (hot start).
    pub fn with_seed(mut self, seed: FotParams) -> Self {
        self.warm = Some(seed);
        self
    }

    pub fn config(&self) -> &StfConfig {
        &self.config
    }

    pub fn buffer(&self) -> &[Observation] {
        &self.buffer
    }

    pub fn current_fit(&self) -> Option<&FotParams> {
        self.current.as_ref().map(|r| &r.params)
    }

    pub fn last_result(&self) -> Option<&FitResult> {
        self.current.as_ref()
    }

    /// `[k1, k2]` of the buffered samples.
    pub fn sample_span(&self) -> Option<(f64, f64)> {
        Some((self.buffer.first()?.time, self.buffer.last()?.time))
    }

    /// Adds a known state at `time` as a pseudo-observation.
    pub fn seed_anchor(&mut self, time: f64, state: DVector<f64>) -> Result<PushOutcome> {
        self.push_observation(Observation::anchor(time, state))
    }

    /// Inserts `obs` in time order, evicts samples beyond the window and
    /// refits once at least `order` distinct times are buffered.
    pub fn push_observation(&mut self, obs: Observation) -> Result<PushOutcome> {
        self.push_batch(vec![obs])
    }

    /// Inserts several observations (typically one per sensor at a common
    /// time) and refits once.
    pub fn push_batch(&mut self, batch: Vec<Observation>) -> Result<PushOutcome> {
        for obs in &batch {
            obs.validate()?;
        }
        let mut outcome = PushOutcome::default();
        for obs in batch {
            outcome.replaced |= self.insert(obs);
        }
        self.evict();

        if crate::fitting::distinct_times(&self.buffer) < self.config.order {
            return Ok(outcome);
        }
        let result = self.refit()?;
        self.warm = Some(result.params.clone());
        self.current = Some(result);
        outcome.refitted = true;
        Ok(outcome)
    }

    /// Sorted insert; returns true when an equal (time, sensor) key was replaced.
    fn insert(&mut self, obs: Observation) -> bool {
        let key = |o: &Observation| (o.time, o.sensor_id);
        match self.buffer.iter().position(|o| key(o) == key(&obs)) {
            Some(i) => {
                self.buffer[i] = obs;
                true
            }
            None => {
                let at = self
                    .buffer
                    .partition_point(|o| o.time < obs.time || (o.time == obs.time && o.sensor_id < obs.sensor_id));
                self.buffer.insert(at, obs);
                false
            }
        }
    }

    fn evict(&mut self) {
        let newest = match self.buffer.last() {
            Some(o) => o.time,
            None => return,
        };
        if let Some(span) = self.config.max_span {
            self.buffer.retain(|o| newest - o.time <= span);
        }
        while crate::fitting::distinct_times(&self.buffer) > self.config.window_count {
            let oldest = self.buffer[0].time;
            self.buffer.retain(|o| o.time != oldest);
        }
    }

    fn refit(&self) -> Result<FitResult> {
        let (k1, k2) = self.sample_span().ok_or(StfError::NoFit)?;
        let window = TimeWindow::new(k1, k2, self.config.window_count)?;
        let mut problem = FitProblem {
            window,
            observations: self.buffer.clone(),
            spec: self.spec.clone(),
            basis: self.basis.clone(),
            bounds: None,
            initial_params: None,
            options: Default::default(),
        };
        if self.spec.model.is_identity() {
            linear_ls_fit(&problem)
        } else {
            problem.initial_params = Some(warm_start_seed(self.warm.as_ref(), &window, &problem));
            nonlinear_ls_fit(&problem)
        }
    }

    /// Default query time of each mode relative to the newest sample `k2`.
    pub fn default_query_time(&self, mode: QueryMode) -> Result<f64> {
        let (_, k2) = self.sample_span().ok_or(StfError::NoFit)?;
        let dt = self.config.nominal_interval;
        match mode {
            QueryMode::Delayed => Ok(k2 - self.config.delay_steps as f64 * dt),
            QueryMode::Online => Ok(k2),
            QueryMode::Forecast => Ok(k2 + self.config.horizon_steps as f64 * dt),
            QueryMode::Smoothed => Err(StfError::InvalidConfig(
                "smoothed estimates come from a completed record, see smoothed_pass".into(),
            )),
        }
    }

    pub fn infer_at(&self, mode: QueryMode, query_time: Option<f64>) -> Result<StfOutput> {
        let fit = self.current_fit().ok_or(StfError::NoFit)?;
        let t = match query_time {
            Some(t) => t,
            None => self.default_query_time(mode)?,
        };
        let (k1, k2) = self.sample_span().ok_or(StfError::NoFit)?;
        Ok(StfOutput { query_time: t, estimate: fit.state_at(t), mode, extrapolated: t < k1 || t > k2 })
    }

    /// Effective fitting window `[k1 - d*dt, k2 + n*dt]`.
    pub fn effective_window(&self) -> Result<(f64, f64)> {
        if self.current.is_none() {
            return Err(StfError::NoFit);
        }
        let (k1, k2) = self.sample_span().ok_or(StfError::NoFit)?;
        Ok(extend_window(k1, k2, self.config.delay_steps, self.config.horizon_steps, self.config.nominal_interval))
    }
}

/// `[k1 - delay*dt, k2 + horizon*dt]`.
pub fn extend_window(k1: f64, k2: f64, delay_steps: usize, horizon_steps: usize, dt: f64) -> (f64, f64) {
    (k1 - delay_steps as f64 * dt, k2 + horizon_steps as f64 * dt)
}

/// Once-backward sliding-window refit of a delayed-fitting record.
///
/// Every estimate is replaced by a linear fit over the `2 * (window_count/2) + 1`
/// neighbouring estimates centred on it (shifted inwards at the record ends),
/// evaluated at its own time.
pub fn smoothed_pass(record: &[(f64, DVector<f64>)], config: &StfConfig) -> Result<Vec<DVector<f64>>> {
    let m = config.order;
    let len = record.len();
    if len < m {
        return Err(StfError::ShortRecord { len, required: m });
    }
    let dims = record[0].1.len();
    let half = config.window_count / 2;
    let size = (2 * half + 1).min(len);
    let basis = BasisSpec::monomial(m);
    let mut out = vec![DVector::zeros(dims); len];
    for j in (0..len).rev() {
        let start = j.saturating_sub(half).min(len - size);
        let observations: Vec<Observation> =
            record[start..start + size].iter().map(|(t, x)| Observation::new(*t, 0, x.clone())).collect();
        let problem = FitProblem::new(observations, ResidualSpec::identity(dims), basis.clone())?;
        let fit = linear_ls_fit(&problem)?;
        out[j] = fit.params.state_at(record[j].0);
    }
    Ok(out)
}
