use nalgebra::{DMatrix, DVector};

use crate::belief::{symmetrize, GaussianBelief};
use crate::error::{BaselineError, Result};
use crate::kalman::{check_dim, gaussian_log_likelihood, smoother_gain, ForwardPass, StepRecord};
use crate::models::{Dynamics, Measurement};

/// Unscented transform scaling. `kappa = None` means `3 - n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: Option<f64>,
}

impl Default for SigmaParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 2.0, kappa: None }
    }
}

/// 2n+1 sigma points with mean and covariance weights.
#[derive(Debug, Clone)]
pub struct SigmaPoints {
    pub points: Vec<DVector<f64>>,
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
}

impl SigmaParams {
    pub fn points(&self, belief: &GaussianBelief) -> Result<SigmaPoints> {
        let n = belief.dim();
        let nf = n as f64;
        let kappa = self.kappa.unwrap_or(3.0 - nf);
        let lambda = self.alpha * self.alpha * (nf + kappa) - nf;
        let scale = nf + lambda;
        if scale <= 0.0 {
            return Err(BaselineError::Invalid(format!("sigma-point spread {scale} is not positive")));
        }
        let root = matrix_sqrt(&belief.cov)? * scale.sqrt();
        let mut points = Vec::with_capacity(2 * n + 1);
        points.push(belief.mean.clone());
        for i in 0..n {
            points.push(&belief.mean + root.column(i));
        }
        for i in 0..n {
            points.push(&belief.mean - root.column(i));
        }
        let w = 1.0 / (2.0 * scale);
        let mut wm = vec![w; 2 * n + 1];
        let mut wc = wm.clone();
        wm[0] = lambda / scale;
        wc[0] = lambda / scale + (1.0 - self.alpha * self.alpha + self.beta);
        Ok(SigmaPoints { points, wm, wc })
    }
}

/// Lower-triangular square root, with a clamped eigen-decomposition
/// fallback for semidefinite input.
fn matrix_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(cov);
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite())
        || eig.eigenvalues.min() < -1e-10 * eig.eigenvalues.amax().max(1.0)
    {
        return Err(BaselineError::Factorization { covariance: format!("{sym}") });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Unscented prediction. Also returns the state/prediction cross covariance
/// needed by the unscented smoother.
pub fn ukf_predict(
    belief: &GaussianBelief,
    dynamics: &dyn Dynamics,
    params: &SigmaParams,
) -> Result<(GaussianBelief, DMatrix<f64>)> {
    let sp = params.points(belief)?;
    let propagated: Vec<DVector<f64>> = sp.points.iter().map(|x| dynamics.propagate(x)).collect();
    let n = belief.dim();
    let mut mean = DVector::zeros(n);
    for (p, w) in propagated.iter().zip(&sp.wm) {
        mean += p * *w;
    }
    let mut cov = dynamics.process_noise(&belief.mean);
    let mut cross = DMatrix::zeros(n, n);
    for ((p, x), w) in propagated.iter().zip(&sp.points).zip(&sp.wc) {
        let d = p - &mean;
        cov += &d * d.transpose() * *w;
        cross += (x - &belief.mean) * d.transpose() * *w;
    }
    Ok((GaussianBelief { mean, cov: symmetrize(&cov) }, cross))
}

/// Unscented correction. Angular measurements are averaged through the
/// model's innovation so wrap-around does not bias the predicted mean.
pub fn ukf_update(
    predicted: &GaussianBelief,
    measurement: &dyn Measurement,
    y: &DVector<f64>,
    params: &SigmaParams,
) -> Result<(GaussianBelief, f64)> {
    check_dim(measurement.dim(), y.len())?;
    let sp = params.points(predicted)?;
    let zs = sp.points.iter().map(|x| measurement.predict(x)).collect::<Result<Vec<_>>>()?;
    let mut z_hat = zs[0].clone();
    for (z, w) in zs.iter().zip(&sp.wm).skip(1) {
        z_hat += measurement.innovation(z, &zs[0]) * *w;
    }
    let dz = measurement.dim();
    let mut s = measurement.noise();
    let mut cross = DMatrix::zeros(predicted.dim(), dz);
    for ((z, x), w) in zs.iter().zip(&sp.points).zip(&sp.wc) {
        let d = measurement.innovation(z, &z_hat);
        s += &d * d.transpose() * *w;
        cross += (x - &predicted.mean) * d.transpose() * *w;
    }
    let s = symmetrize(&s);
    let chol = s.clone().cholesky().ok_or(BaselineError::SingularInnovation)?;
    let gain = chol.solve(&cross.transpose()).transpose();
    let innovation = measurement.innovation(y, &z_hat);
    let mean = &predicted.mean + &gain * &innovation;
    let cov = symmetrize(&(&predicted.cov - &gain * &s * gain.transpose()));
    let mut filtered = GaussianBelief { mean, cov };
    filtered.sanitize();
    Ok((filtered, gaussian_log_likelihood(&innovation, &chol)))
}

/// Unscented Kalman filter predict-correct step.
pub fn ukf_step(
    belief: &GaussianBelief,
    dynamics: &dyn Dynamics,
    measurement: &dyn Measurement,
    y: &DVector<f64>,
    params: &SigmaParams,
) -> Result<StepRecord> {
    check_dim(dynamics.dim(), belief.dim())?;
    let (predicted, _) = ukf_predict(belief, dynamics, params)?;
    let (filtered, log_likelihood) = ukf_update(&predicted, measurement, y, params)?;
    Ok(StepRecord { predicted, filtered, log_likelihood })
}

/// Unscented RTS smoother: the gain uses the sigma-point cross covariance
/// of each filtered belief with its own prediction.
pub fn urts_smooth(pass: &ForwardPass, dynamics: &dyn Dynamics, params: &SigmaParams) -> Result<Vec<GaussianBelief>> {
    let n = pass.len();
    let mut smoothed = pass.filtered.clone();
    for k in (0..n.saturating_sub(1)).rev() {
        let filt = &pass.filtered[k];
        let (pred, cross) = ukf_predict(filt, dynamics, params)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::{ekf_step, kf_step, rts_smooth};
    use crate::models::LinearGaussianModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn sigma_points_recover_standard_normal() {
        for n in 1..=6 {
            let b = GaussianBelief::new(DVector::zeros(n), DMatrix::identity(n, n));
            let sp = SigmaParams::default().points(&b).unwrap();
            assert_eq!(sp.points.len(), 2 * n + 1);
            let mut mean = DVector::zeros(n);
            for (p, w) in sp.points.iter().zip(&sp.wm) {
                mean += p * *w;
            }
            let mut cov = DMatrix::zeros(n, n);
            for (p, w) in sp.points.iter().zip(&sp.wm) {
                cov += (p - &mean) * (p - &mean).transpose() * *w;
            }
            assert!(mean.amax() < 1e-12);
            assert!((cov - DMatrix::identity(n, n)).amax() < 1e-12);
        }
    }

    struct Square;

    impl Dynamics for Square {
        fn dim(&self) -> usize {
            1
        }
        fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
            x.map(|v| v * v)
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, 2.0 * x[0])
        }
        fn process_noise(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::zeros(1, 1)
        }
    }

    /// E[x^2] for x ~ N(0.5, 1) is 1.25; compare the UT to sampling.
    #[test]
    fn quadratic_mean_matches_monte_carlo() {
        let b = GaussianBelief::from_diagonal(&[0.5], &[1.0]);
        let (pred, _) = ukf_predict(&b, &Square, &SigmaParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x: f64 = 0.5 + rng.sample::<f64, _>(StandardNormal);
            acc += x * x;
        }
        let mc = acc / n as f64;
        assert!((pred.mean[0] - mc).abs() / mc < 0.02, "{} vs {mc}", pred.mean[0]);
    }

    fn random_model(rng: &mut ChaCha8Rng) -> LinearGaussianModel {
        let f = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { rng.gen_range(-0.2..0.2) });
        let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-0.3..0.3));
        let h = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        LinearGaussianModel::new(
            f,
            &a * a.transpose() + DMatrix::identity(3, 3) * 0.01,
            h,
            DMatrix::identity(2, 2) * 0.2,
        )
    }

    #[test]
    fn ukf_ekf_kf_agree_on_linear_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random_model(&mut rng);
        let mut kf = GaussianBelief::from_diagonal(&[0.0, 1.0, -1.0], &[1.0, 2.0, 0.5]);
        let mut ekf = kf.clone();
        let mut ukf = kf.clone();
        let mut pass_e = ForwardPass::default();
        let mut pass_u = ForwardPass::default();
        for _ in 0..100 {
            let y = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            kf = kf_step(&kf, &model, &y).unwrap();
            let re = ekf_step(&ekf, &model, &model, &y).unwrap();
            let ru = ukf_step(&ukf, &model, &model, &y, &SigmaParams::default()).unwrap();
            assert!((&re.log_likelihood - ru.log_likelihood).abs() < 1e-8);
            pass_e.push(&re);
            pass_u.push(&ru);
            ekf = re.filtered;
            ukf = ru.filtered;
            assert!((&kf.mean - &ekf.mean).amax() < 1e-12);
            assert!((&kf.mean - &ukf.mean).amax() < 1e-9);
            assert!((&kf.cov - &ukf.cov).amax() < 1e-9);
        }
        let se = rts_smooth(&pass_e, &model).unwrap();
        let su = urts_smooth(&pass_u, &model, &SigmaParams::default()).unwrap();
        for (a, b) in se.iter().zip(&su) {
            assert!((&a.mean - &b.mean).amax() < 1e-8);
        }
    }

    #[test]
    fn factorization_failure_reports_covariance() {
        let b = GaussianBelief::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        match SigmaParams::default().points(&b) {
            Err(BaselineError::Factorization { covariance }) => assert!(covariance.contains("-1")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
