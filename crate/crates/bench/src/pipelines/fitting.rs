//! One sliding-window fitting pass shared by the online, delayed, smoothed
//! and forecast estimators.

use nalgebra::DVector;
use stf_core::{smoothed_pass, FotParams, Observation, StfConfig, Tracker};

use crate::error::Result;

/// Fit available after each step, with the step times and a fallback
/// estimate for steps without a fit.
pub struct FitPass {
    pub times: Vec<f64>,
    pub fits: Vec<Option<FotParams>>,
    /// Distinct non-anchor sample times in the window after each step.
    pub windows: Vec<Vec<f64>>,
    pub fallback: Vec<DVector<f64>>,
}

impl FitPass {
    /// Pushes every step's observations into `tracker` and records the fit.
    pub fn run(
        mut tracker: Tracker,
        steps: impl IntoIterator<Item = (f64, Vec<Observation>, DVector<f64>)>,
    ) -> Result<Self> {
        let mut pass = FitPass { times: Vec::new(), fits: Vec::new(), windows: Vec::new(), fallback: Vec::new() };
        for (time, batch, fallback) in steps {
            tracker.push_batch(batch)?;
            let mut window: Vec<f64> = tracker.buffer().iter().filter(|o| !o.is_anchor()).map(|o| o.time).collect();
            window.dedup();
            pass.times.push(time);
            pass.fits.push(tracker.current_fit().cloned());
            pass.windows.push(window);
            pass.fallback.push(fallback);
        }
        Ok(pass)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn eval(&self, fit_step: usize, j: usize) -> Option<DVector<f64>> {
        self.fits[fit_step].as_ref().map(|f| f.state_at(self.times[j]))
    }

    /// Newest fit evaluated at the newest time.
    pub fn online(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|j| self.eval(j, j).unwrap_or_else(|| self.fallback[j].clone())).collect()
    }

    /// Fit from `delay` steps later evaluated at each step (fewer at the end).
    pub fn delayed(&self, delay: usize) -> Vec<DVector<f64>> {
        let last = self.len().saturating_sub(1);
        (0..self.len())
            .map(|j| {
                self.eval((j + delay).min(last), j)
                    .or_else(|| self.eval(j, j))
                    .unwrap_or_else(|| self.fallback[j].clone())
            })
            .collect()
    }

    /// Backward refit over the delayed record.
    pub fn smoothed(&self, config: &StfConfig) -> Result<Vec<DVector<f64>>> {
        let delayed = self.delayed(config.delay_steps);
        let record: Vec<(f64, DVector<f64>)> = self.times.iter().copied().zip(delayed).collect();
        Ok(smoothed_pass(&record, config)?)
    }

    /// Fit from `horizon` steps earlier extrapolated to each step. Early
    /// steps use the first fit available; steps before any fit use the
    /// fallback.
    pub fn forecast(&self, horizon: usize) -> Vec<DVector<f64>> {
        let first = self.fits.iter().position(Option::is_some);
        (0..self.len())
            .map(|j| {
                let source = match first {
                    Some(_) if j >= horizon && self.fits[j - horizon].is_some() => Some(j - horizon),
                    Some(f) if f <= j => Some(f),
                    _ => None,
                };
                source.and_then(|s| self.eval(s, j)).unwrap_or_else(|| self.fallback[j].clone())
            })
            .collect()
    }
}
