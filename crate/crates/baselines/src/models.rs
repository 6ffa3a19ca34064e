use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Discrete-time state transition `x' = f(x) + w`, `w ~ N(0, Q)`.
pub trait Dynamics: Send + Sync {
    fn dim(&self) -> usize;
    fn propagate(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn process_noise(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Observation `y = h(x) + v`, `v ~ N(0, R)`.
pub trait Measurement: Send + Sync {
    fn dim(&self) -> usize;
    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn noise(&self) -> DMatrix<f64>;

    /// `y - y_hat`; angular measurements wrap the difference.
    fn innovation(&self, y: &DVector<f64>, y_hat: &DVector<f64>) -> DVector<f64> {
        y - y_hat
    }
}

/// Linear-Gaussian transition and observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub observation_noise: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        observation: DMatrix<f64>,
        observation_noise: DMatrix<f64>,
    ) -> Self {
        Self { transition, process_noise, observation, observation_noise }
    }

    /// Wiener-process velocity on `axes` axes, state `[pos.., vel..]`,
    /// position observed with variance `r` per axis.
    pub fn wpv(axes: usize, q: f64, dt: f64, r: f64) -> Self {
        let (f1, q1) = wpv_block(q, dt);
        Self::from_blocks(axes, 2, &f1, &q1, r)
    }

    /// Wiener-process acceleration, state `[pos.., vel.., acc..]`.
    pub fn wpa(axes: usize, q: f64, dt: f64, r: f64) -> Self {
        let (f1, q1) = wpa_block(q, dt);
        Self::from_blocks(axes, 3, &f1, &q1, r)
    }

    /// WPV embedded in the WPA state layout. Acceleration components are
    /// carried unchanged and do not drive the position.
    pub fn wpv_in_wpa_layout(axes: usize, q: f64, dt: f64, r: f64) -> Self {
        let (f2, q2) = wpv_block(q, dt);
        let mut f1 = DMatrix::zeros(3, 3);
        let mut q1 = DMatrix::zeros(3, 3);
        f1.view_mut((0, 0), (2, 2)).copy_from(&f2);
        q1.view_mut((0, 0), (2, 2)).copy_from(&q2);
        f1[(2, 2)] = 1.0;
        Self::from_blocks(axes, 3, &f1, &q1, r)
    }

    /// Backward-time model `x_k = F^+ x_{k+1} - F^+ w`. The pseudo-inverse
    /// keeps components the forward model resets at zero; the noise they
    /// would lose is kept as is so the covariance stays invertible.
    pub fn reversed(&self) -> Self {
        let n = self.transition.nrows();
        let inverse = self.transition.clone().pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::identity(n, n));
        let mut noise = &inverse * &self.process_noise * inverse.transpose();
        for i in 0..n {
            if inverse.row(i).iter().all(|v| *v == 0.0) {
                noise[(i, i)] = self.process_noise[(i, i)];
            }
        }
        Self { transition: inverse, process_noise: noise, ..self.clone() }
    }

    /// Per-axis blocks interleaved into a `[pos.., vel.., acc..]` layout.
    fn from_blocks(axes: usize, order: usize, f1: &DMatrix<f64>, q1: &DMatrix<f64>, r: f64) -> Self {
        let n = axes * order;
        let mut f = DMatrix::zeros(n, n);
        let mut qm = DMatrix::zeros(n, n);
        for a in 0..axes {
            for i in 0..order {
                for j in 0..order {
                    f[(i * axes + a, j * axes + a)] = f1[(i, j)];
                    qm[(i * axes + a, j * axes + a)] = q1[(i, j)];
                }
            }
        }
        let mut h = DMatrix::zeros(axes, n);
        for a in 0..axes {
            h[(a, a)] = 1.0;
        }
        Self::new(f, qm, h, DMatrix::identity(axes, axes) * r)
    }
}

fn wpv_block(q: f64, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let f = DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
    let qm = DMatrix::from_row_slice(2, 2, &[dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt.powi(2) / 2.0, dt]) * q;
    (f, qm)
}

fn wpa_block(q: f64, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let f = DMatrix::from_row_slice(3, 3, &[1.0, dt, dt * dt / 2.0, 0.0, 1.0, dt, 0.0, 0.0, 1.0]);
    let qm = DMatrix::from_row_slice(
        3,
        3,
        &[
            dt.powi(5) / 20.0,
            dt.powi(4) / 8.0,
            dt.powi(3) / 6.0,
            dt.powi(4) / 8.0,
            dt.powi(3) / 3.0,
            dt.powi(2) / 2.0,
            dt.powi(3) / 6.0,
            dt.powi(2) / 2.0,
            dt,
        ],
    ) * q;
    (f, qm)
}

impl Dynamics for LinearGaussianModel {
    fn dim(&self) -> usize {
        self.transition.nrows()
    }

    fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.transition * x
    }

    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.transition.clone()
    }

    fn process_noise(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.process_noise.clone()
    }
}

impl Measurement for LinearGaussianModel {
    fn dim(&self) -> usize {
        self.observation.nrows()
    }

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.observation * x)
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.observation.clone())
    }

    fn noise(&self) -> DMatrix<f64> {
        self.observation_noise.clone()
    }
}
