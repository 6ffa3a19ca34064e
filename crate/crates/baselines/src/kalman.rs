use nalgebra::{DMatrix, DVector};

use crate::belief::{symmetrize, GaussianBelief};
use crate::error::{BaselineError, Result};
use crate::models::{Dynamics, LinearGaussianModel, Measurement};

/// One filter step: the prediction it started from, the corrected belief,
/// and the measurement log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub predicted: GaussianBelief,
    pub filtered: GaussianBelief,
    pub log_likelihood: f64,
}

/// Stored forward pass for smoothing. `predicted[k]` is the prediction
/// that was corrected into `filtered[k]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardPass {
    pub predicted: Vec<GaussianBelief>,
    pub filtered: Vec<GaussianBelief>,
}

impl ForwardPass {
    pub fn push(&mut self, record: &StepRecord) {
        self.predicted.push(record.predicted.clone());
        self.filtered.push(record.filtered.clone());
    }

    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }
}

/// First-order prediction through the dynamics.
pub fn ekf_predict(belief: &GaussianBelief, dynamics: &dyn Dynamics) -> GaussianBelief {
    let f = dynamics.jacobian(&belief.mean);
    let mean = dynamics.propagate(&belief.mean);
    let cov = symmetrize(&(&f * &belief.cov * f.transpose() + dynamics.process_noise(&belief.mean)));
    GaussianBelief { mean, cov }
}

/// First-order correction, Joseph form.
pub fn ekf_update(
    predicted: &GaussianBelief,
    measurement: &dyn Measurement,
    y: &DVector<f64>,
) -> Result<(GaussianBelief, f64)> {
    check_dim(measurement.dim(), y.len())?;
    let h = measurement.jacobian(&predicted.mean)?;
    let y_hat = measurement.predict(&predicted.mean)?;
    let r = measurement.noise();
    let innovation = measurement.innovation(y, &y_hat);
    let ph = &predicted.cov * h.transpose();
    let s = symmetrize(&(&h * &ph + &r));
    let chol = s.clone().cholesky().ok_or(BaselineError::SingularInnovation)?;
    let gain = chol.solve(&ph.transpose()).transpose();
    let mean = &predicted.mean + &gain * &innovation;
    let n = predicted.dim();
    let ikh = DMatrix::identity(n, n) - &gain * &h;
    let cov = symmetrize(&(&ikh * &predicted.cov * ikh.transpose() + &gain * &r * gain.transpose()));
    let mut filtered = GaussianBelief { mean, cov };
    filtered.sanitize();
    Ok((filtered, gaussian_log_likelihood(&innovation, &chol)))
}

/// Extended Kalman filter predict-correct step.
pub fn ekf_step(
    belief: &GaussianBelief,
    dynamics: &dyn Dynamics,
    measurement: &dyn Measurement,
    y: &DVector<f64>,
) -> Result<StepRecord> {
    check_dim(dynamics.dim(), belief.dim())?;
    let predicted = ekf_predict(belief, dynamics);
    let (filtered, log_likelihood) = ekf_update(&predicted, measurement, y)?;
    Ok(StepRecord { predicted, filtered, log_likelihood })
}

/// Kalman filter step on a linear-Gaussian model. Shares the EKF code
/// path; linearization of a linear model is exact.
pub fn kf_step(belief: &GaussianBelief, model: &LinearGaussianModel, y: &DVector<f64>) -> Result<GaussianBelief> {
    Ok(ekf_step(belief, model, model, y)?.filtered)
}

/// Rauch-Tung-Striebel backward pass. Nonlinear dynamics are linearized
/// about each filtered mean.
pub fn rts_smooth(pass: &ForwardPass, dynamics: &dyn Dynamics) -> Result<Vec<GaussianBelief>> {
    let n = pass.len();
    if pass.predicted.len() != n {
        return Err(BaselineError::DimensionMismatch { expected: n, got: pass.predicted.len() });
    }
    let mut smoothed = pass.filtered.clone();
    for k in (0..n.saturating_sub(1)).rev() {
        let filt = &pass.filtered[k];
        let pred = &pass.predicted[k + 1];
        let f = dynamics.jacobian(&filt.mean);
        let cross = &filt.cov * f.transpose();
        let gain = smoother_gain(&cross, &pred.cov, k)?;
        let next = &smoothed[k + 1];
        let mean = &filt.mean + &gain * (&next.mean - &pred.mean);
        let cov = symmetrize(&(&filt.cov + &gain * (&next.cov - &pred.cov) * gain.transpose()));
        let mut b = GaussianBelief { mean, cov };
        b.sanitize();
        smoothed[k] = b;
    }
    Ok(smoothed)
}

/// `cross · predicted^-1`, failing when the predicted covariance is singular.
pub(crate) fn smoother_gain(cross: &DMatrix<f64>, predicted: &DMatrix<f64>, step: usize) -> Result<DMatrix<f64>> {
    let lu = predicted.clone().lu();
    let inv = lu.try_inverse().ok_or(BaselineError::SingularPredicted { step })?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::SingularPredicted { step });
    }
    Ok(cross * inv)
}

pub(crate) fn gaussian_log_likelihood(innovation: &DVector<f64>, chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let d = innovation.len() as f64;
    let maha = innovation.dot(&chol.solve(innovation));
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    -0.5 * (maha + log_det + d * (2.0 * std::f64::consts::PI).ln())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(BaselineError::DimensionMismatch { expected, got })
    }
}
