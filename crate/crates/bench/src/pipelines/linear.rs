//! Scenario 1: switching WPV/WPA motion observed in position.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use stf_baselines::{rts_smooth, FilterKind, GaussianBelief, ImmBank, ImmFilter, ImmModel, LinearGaussianModel};
use stf_core::{Observation, ResidualSpec, Tracker};
use stf_scenarios::linear::{observe, simulate_truth};
use stf_scenarios::{EstimateSeries, RunResult};

use super::fitting::FitPass;
use super::{filter_pass, imm_forecasts, leading, oracle, Cached, Clock};
use crate::config::CampaignConfig;
use crate::error::Result;
use crate::streams::{stream, Role};

const POSITION: [usize; 2] = [0, 1];

pub fn run(cfg: &CampaignConfig, run: usize) -> Result<RunResult> {
    let lc = &cfg.linear;
    let stf = cfg.stf_config();
    let truth_all = simulate_truth(lc, &mut stream(cfg.seed, run, Role::Truth));
    let mut noise = stream(cfg.seed, run, Role::Noise);
    let truth = truth_all[1..].to_vec();
    let ys: Vec<DVector<f64>> = truth.iter().map(|x| observe(lc, x, &mut noise)).collect();

    let prior6 = GaussianBelief::from_diagonal(&lc.initial_state, &lc.prior_variances);
    let prior4 = GaussianBelief::from_diagonal(&lc.initial_state[..4], &lc.prior_variances[..4]);
    let wpv = lc.wpv_model();
    let wpa = lc.wpa_model();
    let bank = imm_bank(cfg)?;

    let mut imm: Cached<ImmFilter> = Cached::new();
    let mut fits: Cached<FitPass> = Cached::new();
    let run_imm = || -> Result<ImmFilter> {
        let mut f = ImmFilter::new(bank.clone(), prior6.clone());
        for y in &ys {
            f.step(y)?;
        }
        Ok(f)
    };
    let run_fit = || -> Result<FitPass> {
        let tracker = Tracker::new(stf, ResidualSpec::identity(2))?;
        let steps = ys.iter().enumerate().map(|(i, y)| {
            let t = lc.time(i + 1);
            (t, vec![Observation::new(t, 0, y.clone())], y.clone())
        });
        FitPass::run(tracker, steps)
    };

    let mut estimates = Vec::with_capacity(cfg.estimators.len());
    for name in &cfg.estimators {
        // Shared passes are charged to every estimator that reads them.
        let shared = match name.as_str() {
            n if n.starts_with("imm") => imm.get(cfg.timing, &run_imm)?.1,
            n if n.starts_with("fit-") => fits.get(cfg.timing, &run_fit)?.1,
            _ => 0.0,
        };
        let clock = Clock::start(cfg.timing);
        let values = match name.as_str() {
            "kf-wpv" => leading(&filter_pass(&prior4, &wpv, &wpv, &ys, FilterKind::Extended)?.filtered, 2),
            "ks-wpv" => {
                let pass = filter_pass(&prior4, &wpv, &wpv, &ys, FilterKind::Extended)?;
                leading(&rts_smooth(&pass, &wpv)?, 2)
            }
            "kf-wpa" => leading(&filter_pass(&prior6, &wpa, &wpa, &ys, FilterKind::Extended)?.filtered, 2),
            "ks-wpa" => {
                let pass = filter_pass(&prior6, &wpa, &wpa, &ys, FilterKind::Extended)?;
                leading(&rts_smooth(&pass, &wpa)?, 2)
            }
            "imm" | "imm-smoother" | "imm-forecast" => {
                let (f, _) = imm.get(cfg.timing, &run_imm)?;
                match name.as_str() {
                    "imm" => f.records.iter().map(|r| r.combined.mean.rows(0, 2).into_owned()).collect(),
                    "imm-smoother" => leading(&f.smooth()?, 2),
                    _ => leading(&imm_forecasts(&bank, &prior6, &f.records, stf.horizon_steps)?, 2),
                }
            }
            "o2" => ys.clone(),
            "fit-online" | "fit-delayed" | "fit-smoothed" | "fit-forecast" => {
                let (pass, _) = fits.get(cfg.timing, &run_fit)?;
                match name.as_str() {
                    "fit-online" => pass.online(),
                    "fit-delayed" => pass.delayed(stf.delay_steps),
                    "fit-smoothed" => pass.smoothed(&stf)?,
                    _ => pass.forecast(stf.horizon_steps),
                }
            }
            "oracle" => oracle(&truth, &POSITION),
            other => unreachable!("estimator {other} passed validation"),
        };
        estimates.push(EstimateSeries {
            name: name.clone(),
            components: POSITION.to_vec(),
            values,
            wall_time_s: clock.seconds() + shared,
        });
    }
    Ok(RunResult { truth, estimates })
}

/// WPV (in the six-state layout) and WPA with a sticky mode chain.
fn imm_bank(cfg: &CampaignConfig) -> Result<ImmBank> {
    let lc = &cfg.linear;
    let model = |m: LinearGaussianModel| {
        let reverse = Arc::new(m.reversed());
        let m = Arc::new(m);
        ImmModel::new(m.clone(), m, FilterKind::Extended).with_reverse(reverse)
    };
    let stay = lc.mode_stay;
    let transition = DMatrix::from_row_slice(2, 2, &[stay, 1.0 - stay, 1.0 - stay, stay]);
    Ok(ImmBank::new(
        vec![model(lc.wpv_model_padded()), model(lc.wpa_model())],
        transition,
        DVector::from_column_slice(&lc.mode_prior),
    )?)
}
