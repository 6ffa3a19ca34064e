//! Scenario 1: a target switching between Wiener-process velocity and
//! Wiener-process acceleration motion, observed in position.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use stf_baselines::LinearGaussianModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Wpv,
    Wpa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearConfig {
    pub dt: f64,
    pub steps: usize,
    pub q_wpv: f64,
    pub q_wpa: f64,
    /// Inclusive step ranges flown under WPA; all other steps are WPV.
    pub wpa_intervals: Vec<(usize, usize)>,
    /// `[x, y, vx, vy, ax, ay]` at step 0.
    pub initial_state: [f64; 6],
    pub obs_variance: f64,
    pub prior_variances: [f64; 6],
    pub mode_prior: [f64; 2],
    pub mode_stay: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            steps: 200,
            q_wpv: 0.1,
            q_wpa: 1.0,
            wpa_intervals: vec![(51, 70), (121, 150)],
            initial_state: [0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
            obs_variance: 0.1,
            prior_variances: [0.1, 0.1, 0.1, 0.1, 0.5, 0.5],
            mode_prior: [0.9, 0.1],
            mode_stay: 0.98,
        }
    }
}

impl LinearConfig {
    /// Motion model in force at `step` (1-based).
    pub fn motion_at(&self, step: usize) -> Motion {
        if self.wpa_intervals.iter().any(|&(a, b)| (a..=b).contains(&step)) {
            Motion::Wpa
        } else {
            Motion::Wpv
        }
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Six-state WPA model with position observations.
    pub fn wpa_model(&self) -> LinearGaussianModel {
        LinearGaussianModel::wpa(2, self.q_wpa, self.dt, self.obs_variance)
    }

    /// Four-state WPV model with position observations.
    pub fn wpv_model(&self) -> LinearGaussianModel {
        LinearGaussianModel::wpv(2, self.q_wpv, self.dt, self.obs_variance)
    }

    /// WPV expressed in the six-state layout, for the IMM bank.
    pub fn wpv_model_padded(&self) -> LinearGaussianModel {
        LinearGaussianModel::wpv_in_wpa_layout(2, self.q_wpv, self.dt, self.obs_variance)
    }
}

/// Draws from `N(0, q)` through a symmetric square root.
pub fn gaussian<R: Rng + ?Sized>(cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let eig = cov.clone().symmetric_eigen();
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let z = DVector::from_fn(cov.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    root * z
}

/// States for steps `0..=steps`. Under WPV the acceleration is zero; a WPA
/// segment starts from zero acceleration.
pub fn simulate_truth<R: Rng + ?Sized>(config: &LinearConfig, rng: &mut R) -> Vec<DVector<f64>> {
    let wpv = config.wpv_model();
    let wpa = config.wpa_model();
    let mut x = DVector::from_column_slice(&config.initial_state);
    let mut out = Vec::with_capacity(config.steps + 1);
    out.push(x.clone());
    for k in 1..=config.steps {
        x = match config.motion_at(k) {
            Motion::Wpv => {
                let sub = x.rows(0, 4).into_owned();
                let next = &wpv.transition * sub + gaussian(&wpv.process_noise, rng);
                let mut full = DVector::zeros(6);
                full.rows_mut(0, 4).copy_from(&next);
                full
            }
            Motion::Wpa => &wpa.transition * &x + gaussian(&wpa.process_noise, rng),
        };
        out.push(x.clone());
    }
    out
}

/// Noisy position observation.
pub fn observe<R: Rng + ?Sized>(config: &LinearConfig, state: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let sd = config.obs_variance.sqrt();
    DVector::from_fn(2, |i, _| state[i] + sd * rng.sample::<f64, _>(StandardNormal))
}
