use nalgebra::DVector;

use crate::error::{Result, ScenarioError};

/// Per-step RMSE across runs and its mean over steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseSeries {
    pub per_step: Vec<f64>,
    pub mean: f64,
}

/// One estimator's output over a run. `components` selects the truth
/// state entries the values are compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub name: String,
    pub components: Vec<usize>,
    pub values: Vec<DVector<f64>>,
    pub wall_time_s: f64,
}

/// One Monte-Carlo run: per-step truth states and every estimator's output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub truth: Vec<DVector<f64>>,
    pub estimates: Vec<EstimateSeries>,
}

impl RunResult {
    pub fn validate(&self) -> Result<()> {
        for e in &self.estimates {
            if e.values.len() != self.truth.len() {
                return Err(ScenarioError::LengthMismatch { expected: self.truth.len(), got: e.values.len() });
            }
        }
        Ok(())
    }

    /// Truth restricted to `components` at every step.
    pub fn projected_truth(&self, components: &[usize]) -> Vec<DVector<f64>> {
        self.truth.iter().map(|x| DVector::from_iterator(components.len(), components.iter().map(|&i| x[i]))).collect()
    }
}

/// `estimates[run][step]` against `truths[run][step]`; the error at a step
/// is the Euclidean norm of the difference.
pub fn rmse(estimates: &[Vec<DVector<f64>>], truths: &[Vec<DVector<f64>>]) -> Result<RmseSeries> {
    if estimates.len() != truths.len() {
        return Err(ScenarioError::LengthMismatch { expected: truths.len(), got: estimates.len() });
    }
    let steps = truths.first().map_or(0, Vec::len);
    let mut sq = vec![0.0; steps];
    for (est, tru) in estimates.iter().zip(truths) {
        if est.len() != steps || tru.len() != steps {
            return Err(ScenarioError::LengthMismatch { expected: steps, got: est.len().min(tru.len()) });
        }
        for (k, (e, t)) in est.iter().zip(tru).enumerate() {
            if e.len() != t.len() {
                return Err(ScenarioError::LengthMismatch { expected: t.len(), got: e.len() });
            }
            sq[k] += (e - t).norm_squared();
        }
    }
    let runs = estimates.len().max(1) as f64;
    let per_step: Vec<f64> = sq.iter().map(|s| (s / runs).sqrt()).collect();
    let mean = if steps == 0 { 0.0 } else { per_step.iter().sum::<f64>() / steps as f64 };
    Ok(RmseSeries { per_step, mean })
}
