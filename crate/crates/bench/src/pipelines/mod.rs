//! Estimator pipelines for the three scenarios. Each returns one
//! [`RunResult`](stf_scenarios::RunResult) with the estimators in the order
//! the campaign lists them.

pub mod ballistic;
pub mod bearings;
pub mod fitting;
pub mod linear;

use std::time::Instant;

use nalgebra::DVector;
use stf_baselines::{
    ekf_step, imm_forecast, ukf_step, Dynamics, FilterKind, ForwardPass, GaussianBelief, ImmBank, ImmRecord,
    Measurement,
};

use crate::error::Result;

/// Wall clock that reads zero when timing is off.
pub(crate) struct Clock(Option<Instant>);

impl Clock {
    pub fn start(timing: bool) -> Self {
        Self(timing.then(Instant::now))
    }

    pub fn seconds(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

/// Value computed at most once per run, remembered with its cost.
pub(crate) struct Cached<T>(Option<(T, f64)>);

impl<T> Cached<T> {
    pub fn new() -> Self {
        Self(None)
    }

    pub fn get(&mut self, timing: bool, compute: impl FnOnce() -> Result<T>) -> Result<(&T, f64)> {
        if self.0.is_none() {
            let clock = Clock::start(timing);
            let value = compute()?;
            self.0 = Some((value, clock.seconds()));
        }
        let (value, cost) = self.0.as_ref().expect("filled above");
        Ok((value, *cost))
    }
}

/// Runs a single-model filter over every observation.
pub(crate) fn filter_pass(
    prior: &GaussianBelief,
    dynamics: &dyn Dynamics,
    measurement: &dyn Measurement,
    ys: &[DVector<f64>],
    kind: FilterKind,
) -> Result<ForwardPass> {
    let mut pass = ForwardPass::default();
    let mut belief = prior.clone();
    for y in ys {
        let rec = match &kind {
            FilterKind::Extended => ekf_step(&belief, dynamics, measurement, y)?,
            FilterKind::Unscented(p) => ukf_step(&belief, dynamics, measurement, y, p)?,
        };
        belief = rec.filtered.clone();
        pass.push(&rec);
    }
    Ok(pass)
}

/// Estimate for step `j` (1-based) predicted from the IMM state at step
/// `max(j - horizon, 0)`.
pub(crate) fn imm_forecasts(
    bank: &ImmBank,
    prior: &GaussianBelief,
    records: &[ImmRecord],
    horizon: usize,
) -> Result<Vec<GaussianBelief>> {
    let initial = vec![prior.clone(); bank.models.len()];
    (1..=records.len())
        .map(|j| {
            let source = j.saturating_sub(horizon);
            let (bank, beliefs) = match source {
                0 => (bank.clone(), initial.clone()),
                s => {
                    let mut b = bank.clone();
                    b.probabilities = records[s - 1].probabilities.clone();
                    (b, records[s - 1].filtered.clone())
                }
            };
            Ok(imm_forecast(&bank, &beliefs, j - source)?)
        })
        .collect()
}

/// First `n` components of every mean.
pub(crate) fn leading(beliefs: &[GaussianBelief], n: usize) -> Vec<DVector<f64>> {
    beliefs.iter().map(|b| b.mean.rows(0, n).into_owned()).collect()
}

/// Truth restricted to `components`, used by the oracle estimator.
pub(crate) fn oracle(truth: &[DVector<f64>], components: &[usize]) -> Vec<DVector<f64>> {
    truth.iter().map(|x| DVector::from_iterator(components.len(), components.iter().map(|&i| x[i]))).collect()
}
