//! Scenario 3: a body falling vertically through a drag-dependent
//! atmosphere, observed by a radar at a horizontal offset.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use stf_baselines::{Dynamics, Measurement};
use stf_core::fitting::{levenberg_marquardt, LmOptions};
use stf_core::{FotParams, ObservationModel};

use crate::error::{Result, ScenarioError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallisticConfig {
    /// Horizontal distance from radar to target.
    pub m: f64,
    /// Radar altitude.
    pub h: f64,
    pub gamma: f64,
    /// Truth `[altitude, speed, drag coefficient]` at t = 0.
    pub initial_state: [f64; 3],
    pub prior_mean: [f64; 3],
    pub prior_variances: [f64; 3],
    /// Range noise variance.
    pub noise_variance: f64,
    /// Observations at t = 1..=steps seconds.
    pub steps: usize,
    pub substeps_per_second: usize,
    pub window: usize,
    pub order: usize,
    /// Drag coefficient assumed before the first velocity fit.
    pub initial_coefficient: f64,
    pub particles: usize,
    pub debias_samples: usize,
    /// Relative weight of the acceleration discrepancy in the velocity fit.
    pub velocity_fit_scale: f64,
}

impl Default for BallisticConfig {
    fn default() -> Self {
        Self {
            m: 1e5,
            h: 1e5,
            gamma: 5e-5,
            initial_state: [3e5, 2e4, 1e-3],
            prior_mean: [3e5, 2e4, 3e-3],
            prior_variances: [1e6, 4e6, 1e-4],
            noise_variance: 1e4,
            steps: 30,
            substeps_per_second: 64,
            window: 5,
            order: 3,
            initial_coefficient: 3e-3,
            particles: 200,
            debias_samples: 100,
            velocity_fit_scale: 1.0,
        }
    }
}

impl BallisticConfig {
    pub fn dynamics(&self) -> BallisticDynamics {
        BallisticDynamics { dt: 1.0, substeps: self.substeps_per_second, gamma: self.gamma }
    }

    /// Filter model: the fall with drag floored at zero.
    pub fn filter_dynamics(&self) -> NonNegativeDrag {
        NonNegativeDrag(self.dynamics())
    }

    pub fn range_model(&self, state_dim: usize) -> Range {
        Range { m: self.m, h: self.h, variance: self.noise_variance, state_dim }
    }

    pub fn range_of(&self, altitude: f64) -> f64 {
        (self.m * self.m + (altitude - self.h).powi(2)).sqrt()
    }
}

/// `[h', s', c'] = [-s, -exp(-gamma h) s^2 c, 0]`.
pub fn derivative(x: &DVector<f64>, gamma: f64) -> DVector<f64> {
    let (h, s, c) = (x[0], x[1], x[2]);
    DVector::from_vec(vec![-s, -(-gamma * h).exp() * s * s * c, 0.0])
}

/// Jacobian of [`derivative`].
pub fn derivative_jacobian(x: &DVector<f64>, gamma: f64) -> DMatrix<f64> {
    let (h, s, c) = (x[0], x[1], x[2]);
    let e = (-gamma * h).exp();
    DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, gamma * e * s * s * c, -2.0 * e * s * c, -e * s * s, 0.0, 0.0, 0.0])
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step(x: &DVector<f64>, f: impl Fn(&DVector<f64>) -> DVector<f64>, dt: f64) -> DVector<f64> {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (dt / 2.0)));
    let k3 = f(&(x + &k2 * (dt / 2.0)));
    let k4 = f(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Integrates the fall over `seconds` with `substeps_per_second` RK4 steps.
pub fn propagate(x: &DVector<f64>, seconds: f64, substeps_per_second: usize, gamma: f64) -> DVector<f64> {
    let n = ((seconds * substeps_per_second as f64).round() as usize).max(1);
    let dt = seconds / n as f64;
    // Same arithmetic as `rk4_step` on `derivative`, without heap vectors.
    let f = |v: [f64; 3]| [-v[1], -(-gamma * v[0]).exp() * v[1] * v[1] * v[2], 0.0];
    let axpy = |a: [f64; 3], k: [f64; 3], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s, a[2] + k[2] * s];
    let mut y = [x[0], x[1], x[2]];
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f(axpy(y, k1, dt / 2.0));
        let k3 = f(axpy(y, k2, dt / 2.0));
        let k4 = f(axpy(y, k3, dt));
        for i in 0..3 {
            y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    DVector::from_column_slice(&y)
}

/// Noise-free fall between observations. The transition Jacobian comes
/// from integrating the variational equations with the same RK4 stages,
/// which makes it the exact derivative of the discrete map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallisticDynamics {
    pub dt: f64,
    pub substeps: usize,
    pub gamma: f64,
}

impl BallisticDynamics {
    fn step_count(&self) -> usize {
        ((self.dt * self.substeps as f64).round() as usize).max(1)
    }

    /// State and sensitivity matrix after one interval.
    pub fn propagate_with_jacobian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.step_count();
        let h = self.dt / n as f64;
        let g = self.gamma;
        let mut y = x.clone();
        let mut phi = DMatrix::identity(3, 3);
        for _ in 0..n {
            let k1 = derivative(&y, g);
            let j1 = derivative_jacobian(&y, g) * &phi;
            let y2 = &y + &k1 * (h / 2.0);
            let p2 = &phi + &j1 * (h / 2.0);
            let k2 = derivative(&y2, g);
            let j2 = derivative_jacobian(&y2, g) * &p2;
            let y3 = &y + &k2 * (h / 2.0);
            let p3 = &phi + &j2 * (h / 2.0);
            let k3 = derivative(&y3, g);
            let j3 = derivative_jacobian(&y3, g) * &p3;
            let y4 = &y + &k3 * h;
            let p4 = &phi + &j3 * h;
            let k4 = derivative(&y4, g);
            let j4 = derivative_jacobian(&y4, g) * &p4;
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            phi += (j1 + j2 * 2.0 + j3 * 2.0 + j4) * (h / 6.0);
        }
        (y, phi)
    }
}

impl Dynamics for BallisticDynamics {
    fn dim(&self) -> usize {
        3
    }

    fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
        propagate(x, self.dt, self.substeps, self.gamma)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.propagate_with_jacobian(x).1
    }

    fn process_noise(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(3, 3)
    }
}

/// [`BallisticDynamics`] in which a negative coefficient produces no drag
/// instead of a forward push; the coefficient itself is carried unchanged.
/// Estimates or sigma points with negative drag would otherwise speed up
/// without bound within one interval. The Jacobian is the one-sided one at
/// zero drag, so the coefficient stays observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonNegativeDrag(pub BallisticDynamics);

impl NonNegativeDrag {
    fn project(x: &DVector<f64>) -> DVector<f64> {
        let mut p = x.clone();
        p[2] = p[2].max(0.0);
        p
    }
}

impl Dynamics for NonNegativeDrag {
    fn dim(&self) -> usize {
        3
    }

    fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = self.0.propagate(&Self::project(x));
        y[2] = x[2];
        y
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.0.jacobian(&Self::project(x))
    }

    fn process_noise(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.0.process_noise(x)
    }
}

/// Range `sqrt(M^2 + (h - H)^2)` to the altitude in the first state component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub m: f64,
    pub h: f64,
    pub variance: f64,
    pub state_dim: usize,
}

impl Range {
    fn value(&self, altitude: f64) -> f64 {
        (self.m * self.m + (altitude - self.h).powi(2)).sqrt()
    }

    fn gradient(&self, altitude: f64) -> f64 {
        (altitude - self.h) / self.value(altitude)
    }

    /// Altitude on the upper branch implied by a single range.
    pub fn upper_altitude(&self, y: f64) -> f64 {
        self.h + (y * y - self.m * self.m).max(0.0).sqrt()
    }
}

impl ObservationModel for Range {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn predict(&self, state: &DVector<f64>, _sensor_id: u32, _time: f64) -> std::result::Result<DVector<f64>, String> {
        Ok(DVector::from_element(1, self.value(state[0])))
    }

    fn state_jacobian(
        &self,
        state: &DVector<f64>,
        _sensor_id: u32,
        _time: f64,
    ) -> Option<std::result::Result<DMatrix<f64>, String>> {
        let mut j = DMatrix::zeros(1, self.state_dim);
        j[(0, 0)] = self.gradient(state[0]);
        Some(Ok(j))
    }

    fn project(&self, y: &DVector<f64>, _sensor_id: u32) -> Option<DVector<f64>> {
        (self.state_dim == 1).then(|| DVector::from_element(1, self.upper_altitude(y[0])))
    }
}

impl Measurement for Range {
    fn dim(&self) -> usize {
        1
    }

    fn predict(&self, x: &DVector<f64>) -> stf_baselines::Result<DVector<f64>> {
        Ok(DVector::from_element(1, self.value(x[0])))
    }

    fn jacobian(&self, x: &DVector<f64>) -> stf_baselines::Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(1, x.len());
        j[(0, 0)] = self.gradient(x[0]);
        Ok(j)
    }

    fn noise(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.variance)
    }
}

/// Truth at t = 0..=steps seconds.
pub fn simulate_truth(config: &BallisticConfig) -> Vec<DVector<f64>> {
    let mut x = DVector::from_column_slice(&config.initial_state);
    let mut out = vec![x.clone()];
    for _ in 0..config.steps {
        x = propagate(&x, 1.0, config.substeps_per_second, config.gamma);
        out.push(x.clone());
    }
    out
}

pub fn observe<R: Rng + ?Sized>(config: &BallisticConfig, state: &DVector<f64>, rng: &mut R) -> f64 {
    config.range_of(state[0]) + config.noise_variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
}

/// Drag coefficient implied by altitude, speed and acceleration.
pub fn coefficient_from_state(h: f64, s: f64, s_dot: f64, gamma: f64, time: f64) -> Result<f64> {
    let denom = (-gamma * h).exp() * s * s;
    if denom == 0.0 || !denom.is_finite() {
        return Err(ScenarioError::ZeroVelocity { time });
    }
    Ok(-s_dot / denom)
}

/// Discrepancies between the fitted trajectories and the fall dynamics:
/// `(h' + s, s' + exp(-gamma h) s^2 c)`.
pub fn discrepancies(h: f64, h_dot: f64, s: f64, s_dot: f64, c: f64, gamma: f64) -> (f64, f64) {
    (h_dot + s, s_dot + (-gamma * h).exp() * s * s * c)
}

#[derive(Debug, Clone)]
pub struct VelocityFit {
    pub velocity: FotParams,
    /// Coefficient implied at the newest sample time, for the next round.
    pub coefficient: f64,
    pub cost: f64,
}

/// Fits the speed trajectory to an altitude trajectory by least squares on
/// the two dynamic discrepancies at `times`, holding the drag coefficient at
/// `c_hat`. The speed basis matches the altitude basis.
pub fn ballistic_velocity_and_coeff_fit(
    altitude: &FotParams,
    times: &[f64],
    c_hat: f64,
    previous: Option<&FotParams>,
    gamma: f64,
    scale: f64,
) -> Result<VelocityFit> {
    let last = *times.last().ok_or(ScenarioError::LengthMismatch { expected: 1, got: 0 })?;
    let template = FotParams::zeros(1, altitude.basis.clone(), altitude.t_ref, altitude.valid_window);
    // Seed from the altitude slope unless a previous speed fit exists.
    let seed = match previous {
        Some(p) => p.recentered(altitude.t_ref),
        None => slope_seed(altitude, &template, times),
    };
    let samples: Vec<(f64, f64, f64)> =
        times.iter().map(|t| (*t, altitude.state_at(*t)[0], altitude.derivative(*t, 1)[0])).collect();
    let w = scale.sqrt();
    let residuals = |b: &DVector<f64>| {
        let v = template.with_flat(b);
        let mut r = DVector::zeros(2 * samples.len());
        for (i, (t, h, h_dot)) in samples.iter().enumerate() {
            let (p1, p2) = discrepancies(*h, *h_dot, v.state_at(*t)[0], v.derivative(*t, 1)[0], c_hat, gamma);
            r[2 * i] = p1;
            r[2 * i + 1] = w * p2;
        }
        Ok(r)
    };
    let basis = &altitude.basis;
    let jacobian = |b: &DVector<f64>, _r: &DVector<f64>| {
        let v = template.with_flat(b);
        let m = b.len();
        let mut j = DMatrix::zeros(2 * samples.len(), m);
        for (i, (t, h, _)) in samples.iter().enumerate() {
            let phi = basis.basis_vector(*t, altitude.t_ref);
            let dphi = basis.derivative_vector(*t, altitude.t_ref, 1);
            let s = v.state_at(*t)[0];
            let e = (-gamma * h).exp();
            for k in 0..m {
                j[(2 * i, k)] = phi[k];
                j[(2 * i + 1, k)] = w * (dphi[k] + 2.0 * e * s * c_hat * phi[k]);
            }
        }
        Ok(j)
    };
    let outcome = levenberg_marquardt(residuals, jacobian, seed.flatten(), None, LmOptions::default())?;
    let velocity = template.with_flat(&outcome.x);
    let h_last = altitude.state_at(last)[0];
    let coefficient =
        coefficient_from_state(h_last, velocity.state_at(last)[0], velocity.derivative(last, 1)[0], gamma, last)?;
    Ok(VelocityFit { velocity, coefficient, cost: outcome.cost })
}

/// Least-squares projection of `-h'(t)` onto the speed basis.
fn slope_seed(altitude: &FotParams, template: &FotParams, times: &[f64]) -> FotParams {
    let m = altitude.order();
    let mut a = DMatrix::zeros(times.len(), m);
    let mut y = DVector::zeros(times.len());
    for (i, t) in times.iter().enumerate() {
        a.set_row(i, &altitude.basis.basis_vector(*t, altitude.t_ref).transpose());
        y[i] = -altitude.derivative(*t, 1)[0];
    }
    let b = a.svd(true, true).solve(&y, 0.0).unwrap_or_else(|_| DVector::zeros(m));
    template.with_flat(&b)
}
