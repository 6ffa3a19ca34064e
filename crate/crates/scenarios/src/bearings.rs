//! Scenario 2: a target flying straight legs joined by coordinated turns,
//! observed through bearings from four fixed sensors.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use stf_baselines::{BaselineError, Dynamics, LinearGaussianModel, Measurement};
use stf_core::ObservationModel;

use crate::angles::wrap_angle;

/// Turn-rate variance of the straight-flight model in the IMM bank.
pub const WPV_TURN_RATE_VARIANCE: f64 = 1e-6;

/// Constant turn rate applied on `[start, end]` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BearingsConfig {
    pub dt: f64,
    pub steps: usize,
    pub sensors: Vec<[f64; 2]>,
    /// Bearing noise variance used to generate observations.
    pub noise_variance: f64,
    /// Variance the model-based filters are told; `None` means the truth.
    pub assumed_noise_variance: Option<f64>,
    pub speed: f64,
    pub turns: Vec<Turn>,
    /// `[x, y, vx, vy, omega]`.
    pub prior_mean: [f64; 5],
    pub prior_variances: [f64; 5],
    pub q_wpv: f64,
    pub q_turn: f64,
    pub mode_prior: [f64; 2],
    pub mode_stay: f64,
}

impl Default for BearingsConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            steps: 200,
            sensors: vec![[-0.5, 3.5], [-0.5, -3.5], [7.0, -3.5], [7.0, 3.5]],
            noise_variance: 0.01,
            assumed_noise_variance: None,
            speed: 1.0,
            turns: vec![
                Turn { start: 6.0, end: 8.0, rate: FRAC_PI_2 },
                Turn { start: 13.0, end: 15.0, rate: -FRAC_PI_2 },
            ],
            prior_mean: [0.0, 0.0, 1.0, 0.0, 0.0],
            prior_variances: [10.1, 10.1, 1.1, 1.1, 1.0],
            q_wpv: 0.01,
            q_turn: 0.15,
            mode_prior: [0.9, 0.1],
            mode_stay: 0.9,
        }
    }
}

impl BearingsConfig {
    pub fn filter_variance(&self) -> f64 {
        self.assumed_noise_variance.unwrap_or(self.noise_variance)
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Turn rate flown between steps `k - 1` and `k`.
    pub fn rate_for_step(&self, k: usize) -> f64 {
        let mid = (k as f64 - 0.5) * self.dt;
        self.turns.iter().find(|t| mid >= t.start && mid <= t.end).map_or(0.0, |t| t.rate)
    }

    pub fn measurement(&self, state_dim: usize) -> Bearings {
        Bearings::new(self.sensors.clone(), self.filter_variance(), state_dim)
    }

    /// Four-state WPV model.
    pub fn wpv_model(&self) -> LinearGaussianModel {
        LinearGaussianModel::wpv(2, self.q_wpv, self.dt, self.filter_variance())
    }

    /// WPV in the five-state turn layout. Straight flight means no turn, so
    /// the turn rate is reset to zero each step; the tiny variance keeps the
    /// predicted covariance invertible for smoothing.
    pub fn wpv_model_with_rate(&self) -> LinearGaussianModel {
        let base = self.wpv_model();
        let mut f = DMatrix::zeros(5, 5);
        let mut q = DMatrix::zeros(5, 5);
        f.view_mut((0, 0), (4, 4)).copy_from(&base.transition);
        q.view_mut((0, 0), (4, 4)).copy_from(&base.process_noise);
        q[(4, 4)] = WPV_TURN_RATE_VARIANCE;
        let mut h = DMatrix::zeros(2, 5);
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        LinearGaussianModel::new(f, q, h, base.observation_noise)
    }

    pub fn turn_model(&self) -> CoordinatedTurn {
        CoordinatedTurn { dt: self.dt, q_turn: self.q_turn }
    }
}

/// Deterministic truth `[x, y, vx, vy, omega]` for steps `0..=steps`.
pub fn simulate_truth(config: &BearingsConfig) -> Vec<DVector<f64>> {
    let ct = config.turn_model();
    let mut x = DVector::from_vec(vec![0.0, 0.0, config.speed, 0.0, 0.0]);
    let mut out = Vec::with_capacity(config.steps + 1);
    out.push(x.clone());
    for k in 1..=config.steps {
        x[4] = config.rate_for_step(k);
        x = ct.propagate(&x);
        out.push(x.clone());
    }
    out
}

/// Noisy bearings from every sensor, wrapped into (-pi, pi].
pub fn observe<R: Rng + ?Sized>(config: &BearingsConfig, state: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let sd = config.noise_variance.sqrt();
    DVector::from_fn(config.sensors.len(), |i, _| {
        let s = config.sensors[i];
        wrap_angle((state[1] - s[1]).atan2(state[0] - s[0]) + sd * rng.sample::<f64, _>(StandardNormal))
    })
}

/// Bearings `atan2(y - s_y, x - s_x)` from fixed sensors to the position
/// held in the first two state components.
#[derive(Debug, Clone, PartialEq)]
pub struct Bearings {
    pub sensors: Vec<[f64; 2]>,
    pub variance: f64,
    pub state_dim: usize,
}

impl Bearings {
    pub fn new(sensors: Vec<[f64; 2]>, variance: f64, state_dim: usize) -> Self {
        Self { sensors, variance, state_dim }
    }

    fn sensor(&self, id: u32) -> std::result::Result<[f64; 2], String> {
        self.sensors.get(id as usize).copied().ok_or_else(|| format!("unknown sensor {id}"))
    }

    /// Bearing and its gradient with respect to `(x, y)`.
    fn bearing(s: [f64; 2], x: f64, y: f64) -> std::result::Result<(f64, f64, f64), String> {
        let (dx, dy) = (x - s[0], y - s[1]);
        let r2 = dx * dx + dy * dy;
        if !(r2 > 1e-18) {
            return Err(format!("target coincides with sensor at ({}, {})", s[0], s[1]));
        }
        Ok((dy.atan2(dx), -dy / r2, dx / r2))
    }
}

impl ObservationModel for Bearings {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn predict(&self, state: &DVector<f64>, sensor_id: u32, _time: f64) -> std::result::Result<DVector<f64>, String> {
        let (b, _, _) = Self::bearing(self.sensor(sensor_id)?, state[0], state[1])?;
        Ok(DVector::from_element(1, b))
    }

    fn state_jacobian(
        &self,
        state: &DVector<f64>,
        sensor_id: u32,
        _time: f64,
    ) -> Option<std::result::Result<DMatrix<f64>, String>> {
        let s = match self.sensor(sensor_id) {
            Ok(s) => s,
            Err(e) => return Some(Err(e)),
        };
        Some(Self::bearing(s, state[0], state[1]).map(|(_, gx, gy)| {
            let mut j = DMatrix::zeros(1, self.state_dim);
            j[(0, 0)] = gx;
            j[(0, 1)] = gy;
            j
        }))
    }

    fn innovation(&self, y: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        (y - predicted).map(wrap_angle)
    }
}

impl Measurement for Bearings {
    fn dim(&self) -> usize {
        self.sensors.len()
    }

    fn predict(&self, x: &DVector<f64>) -> stf_baselines::Result<DVector<f64>> {
        let mut out = DVector::zeros(self.sensors.len());
        for (i, s) in self.sensors.iter().enumerate() {
            out[i] = Self::bearing(*s, x[0], x[1]).map_err(BaselineError::Undefined)?.0;
        }
        Ok(out)
    }

    fn jacobian(&self, x: &DVector<f64>) -> stf_baselines::Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.sensors.len(), x.len());
        for (i, s) in self.sensors.iter().enumerate() {
            let (_, gx, gy) = Self::bearing(*s, x[0], x[1]).map_err(BaselineError::Undefined)?;
            j[(i, 0)] = gx;
            j[(i, 1)] = gy;
        }
        Ok(j)
    }

    fn noise(&self) -> DMatrix<f64> {
        DMatrix::identity(self.sensors.len(), self.sensors.len()) * self.variance
    }

    fn innovation(&self, y: &DVector<f64>, y_hat: &DVector<f64>) -> DVector<f64> {
        (y - y_hat).map(wrap_angle)
    }
}

/// Coordinated turn on `[x, y, vx, vy, omega]` with noise on the turn rate only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatedTurn {
    pub dt: f64,
    /// Spectral density of the turn-rate noise.
    pub q_turn: f64,
}

impl CoordinatedTurn {
    /// The same motion run backwards in time.
    pub fn reversed(&self) -> Self {
        Self { dt: -self.dt, q_turn: self.q_turn }
    }

    /// `sin(w dt)/w`, `(1 - cos(w dt))/w` and their derivatives in `w`.
    fn coefficients(&self, w: f64) -> (f64, f64, f64, f64) {
        let d = self.dt;
        let wd = w * d;
        if wd.abs() < 1e-4 {
            let a = d * (1.0 - wd * wd / 6.0);
            let b = w * d * d / 2.0 * (1.0 - wd * wd / 12.0);
            let da = -w * d * d * d / 3.0;
            let db = d * d / 2.0 - wd * wd * d * d / 8.0;
            (a, b, da, db)
        } else {
            let (s, c) = wd.sin_cos();
            (s / w, (1.0 - c) / w, (d * c * w - s) / (w * w), (d * s * w - (1.0 - c)) / (w * w))
        }
    }
}

impl Dynamics for CoordinatedTurn {
    fn dim(&self) -> usize {
        5
    }

    fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
        let (vx, vy, w) = (x[2], x[3], x[4]);
        let (a, b, _, _) = self.coefficients(w);
        let (s, c) = (w * self.dt).sin_cos();
        DVector::from_vec(vec![x[0] + a * vx - b * vy, x[1] + b * vx + a * vy, c * vx - s * vy, s * vx + c * vy, w])
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (vx, vy, w) = (x[2], x[3], x[4]);
        let d = self.dt;
        let (a, b, da, db) = self.coefficients(w);
        let (s, c) = (w * d).sin_cos();
        DMatrix::from_row_slice(
            5,
            5,
            &[
                1.0,
                0.0,
                a,
                -b,
                da * vx - db * vy,
                0.0,
                1.0,
                b,
                a,
                db * vx + da * vy,
                0.0,
                0.0,
                c,
                -s,
                -d * s * vx - d * c * vy,
                0.0,
                0.0,
                s,
                c,
                d * c * vx - d * s * vy,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
            ],
        )
    }

    /// Forward in time the noise enters the turn rate only; backward it is
    /// carried through the reverse map.
    fn process_noise(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(5, 5);
        q[(4, 4)] = self.q_turn * self.dt.abs();
        if self.dt < 0.0 {
            let j = self.jacobian(x);
            return &j * q * j.transpose();
        }
        q
    }
}
