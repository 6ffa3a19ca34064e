//! Scenario 3: a falling body tracked from noisy radar ranges.

use std::sync::Arc;

use nalgebra::DVector;
use stf_baselines::{
    o2_debias, o2_triangulate, pf_step, FallingTriangulator, FilterKind, GaussianBelief, Likelihood, ParticleSet,
    SigmaParams,
};
use stf_core::{Observation, ResidualSpec, Tracker};
use stf_scenarios::ballistic::{ballistic_velocity_and_coeff_fit, observe, propagate, simulate_truth, BallisticConfig};
use stf_scenarios::{EstimateSeries, RunResult};

use super::fitting::FitPass;
use super::{filter_pass, leading, oracle, Cached, Clock};
use crate::config::CampaignConfig;
use crate::error::Result;
use crate::registry;
use crate::streams::{estimator_stream, stream, Role};

const ALTITUDE: [usize; 1] = [0];
const SPEED: [usize; 1] = [1];

pub fn run(cfg: &CampaignConfig, run: usize) -> Result<RunResult> {
    let bc = &cfg.ballistic;
    let stf = cfg.stf_config();
    let truth_all = simulate_truth(bc);
    let mut noise = stream(cfg.seed, run, Role::Noise);
    let truth = truth_all[1..].to_vec();
    let ys: Vec<f64> = truth.iter().map(|x| observe(bc, x, &mut noise)).collect();
    let ys_vec: Vec<DVector<f64>> = ys.iter().map(|y| DVector::from_element(1, *y)).collect();
    let times: Vec<f64> = (1..=ys.len()).map(|k| k as f64).collect();

    let prior = GaussianBelief::from_diagonal(&bc.prior_mean, &bc.prior_variances);
    let dynamics = bc.filter_dynamics();
    let range = bc.range_model(3);
    let upper = bc.range_model(1);
    let slot = |name: &str| registry::BALLISTIC.iter().position(|n| *n == name).unwrap_or(0);

    let run_fit = || -> Result<FitPass> {
        let tracker = Tracker::new(stf, ResidualSpec::new(Arc::new(upper)))?;
        let steps = times.iter().zip(&ys).map(|(t, y)| {
            let fallback = DVector::from_element(1, upper.upper_altitude(*y));
            (*t, vec![Observation::scalar(*t, 0, *y)], fallback)
        });
        FitPass::run(tracker, steps)
    };
    let mut fits: Cached<FitPass> = Cached::new();

    let mut estimates = Vec::with_capacity(cfg.estimators.len());
    for name in &cfg.estimators {
        let shared = match name.as_str() {
            n if n.starts_with("fit-") => fits.get(cfg.timing, &run_fit)?.1,
            _ => 0.0,
        };
        let clock = Clock::start(cfg.timing);
        let values = match name.as_str() {
            "ekf" => leading(&filter_pass(&prior, &dynamics, &range, &ys_vec, FilterKind::Extended)?.filtered, 1),
            "ukf" => {
                let kind = FilterKind::Unscented(SigmaParams::default());
                leading(&filter_pass(&prior, &dynamics, &range, &ys_vec, kind)?.filtered, 1)
            }
            "pf" => {
                let mut rng = estimator_stream(cfg.seed, run, slot("pf"));
                // Drag coefficients are positive; negative draws would accelerate without bound.
                let mut set = ParticleSet::sample_where(&prior, bc.particles, &mut rng, |p| p[2] > 0.0)?;
                let mut out = Vec::with_capacity(ys.len());
                for y in &ys {
                    let step = pf_step(
                        &set,
                        |p, _| propagate(p, 1.0, bc.substeps_per_second, bc.gamma),
                        |p| bc.range_of(p[0]),
                        *y,
                        Likelihood::HeavyTail,
                        &mut rng,
                    );
                    out.push(step.estimate.rows(0, 1).into_owned());
                    set = step.particles;
                }
                out
            }
            "o2-biased" => {
                let mut tri = FallingTriangulator::new(bc.m, bc.h);
                times
                    .iter()
                    .zip(&ys)
                    .map(|(t, y)| {
                        let h = tri.push(*t, *y, |v, b| o2_triangulate(v, bc.m, bc.h, b).altitude);
                        DVector::from_element(1, h)
                    })
                    .collect()
            }
            "o2-unbiased" => {
                let mut rng = estimator_stream(cfg.seed, run, slot("o2-unbiased"));
                let mut tri = FallingTriangulator::new(bc.m, bc.h);
                times
                    .iter()
                    .zip(&ys)
                    .map(|(t, y)| {
                        let h = tri.push(*t, *y, |v, b| {
                            let g = |r: f64| o2_triangulate(r, bc.m, bc.h, b).altitude;
                            o2_debias(g, v, bc.noise_variance, bc.debias_samples, &mut rng)
                        });
                        DVector::from_element(1, h)
                    })
                    .collect()
            }
            "fit-online" => fits.get(cfg.timing, &run_fit)?.0.online(),
            "fit-velocity" => velocity_series(bc, fits.get(cfg.timing, &run_fit)?.0),
            "oracle" => oracle(&truth, &ALTITUDE),
            other => unreachable!("estimator {other} passed validation"),
        };
        let components = if name == "fit-velocity" { SPEED.to_vec() } else { ALTITUDE.to_vec() };
        estimates.push(EstimateSeries {
            name: name.clone(),
            components,
            values,
            wall_time_s: clock.seconds() + shared,
        });
    }
    Ok(RunResult { truth, estimates })
}

/// Speed from the chain of velocity fits, each seeded by the previous one
/// and using the drag coefficient it implied. Steps before the first
/// altitude fit, or whose velocity fit fails, repeat the last estimate.
fn velocity_series(bc: &BallisticConfig, pass: &FitPass) -> Vec<DVector<f64>> {
    let mut c_hat = bc.initial_coefficient;
    let mut previous = None;
    let mut last = bc.prior_mean[1];
    let mut out = Vec::with_capacity(pass.len());
    for j in 0..pass.len() {
        if let Some(fit) = &pass.fits[j] {
            if let Ok(v) = ballistic_velocity_and_coeff_fit(
                fit,
                &pass.windows[j],
                c_hat,
                previous.as_ref(),
                bc.gamma,
                bc.velocity_fit_scale,
            ) {
                last = v.velocity.state_at(pass.times[j])[0];
                if v.coefficient.is_finite() {
                    c_hat = v.coefficient;
                }
                previous = Some(v.velocity);
            }
        }
        out.push(DVector::from_element(1, last));
    }
    out
}
