//! Scenario 2: straight legs and coordinated turns observed by four
//! bearing sensors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use stf_baselines::{rts_smooth, urts_smooth, FilterKind, GaussianBelief, ImmBank, ImmFilter, ImmModel, SigmaParams};
use stf_core::{BasisSpec, FotParams, Observation, ResidualSpec, Tracker};
use stf_scenarios::bearings::{observe, simulate_truth, BearingsConfig};
use stf_scenarios::{EstimateSeries, RunResult};

use super::fitting::FitPass;
use super::{filter_pass, imm_forecasts, leading, oracle, Cached, Clock};
use crate::config::CampaignConfig;
use crate::error::Result;
use crate::streams::{stream, Role};

const POSITION: [usize; 2] = [0, 1];

pub fn run(cfg: &CampaignConfig, run: usize) -> Result<RunResult> {
    let bc = &cfg.bearings;
    let stf = cfg.stf_config();
    let truth_all = simulate_truth(bc);
    let mut noise = stream(cfg.seed, run, Role::Noise);
    let truth = truth_all[1..].to_vec();
    let ys: Vec<DVector<f64>> = truth.iter().map(|x| observe(bc, x, &mut noise)).collect();

    let prior5 = GaussianBelief::from_diagonal(&bc.prior_mean, &bc.prior_variances);
    let prior4 = GaussianBelief::from_diagonal(&bc.prior_mean[..4], &bc.prior_variances[..4]);
    let wpv = bc.wpv_model();
    let meas4 = bc.measurement(4);
    let ukf = FilterKind::Unscented(SigmaParams::default());
    let ekf_bank = imm_bank(bc, FilterKind::Extended)?;
    let ukf_bank = imm_bank(bc, ukf)?;

    let run_imm = |bank: &ImmBank| -> Result<ImmFilter> {
        let mut f = ImmFilter::new(bank.clone(), prior5.clone());
        for y in &ys {
            f.step(y)?;
        }
        Ok(f)
    };
    let run_ekf_imm = || run_imm(&ekf_bank);
    let run_ukf_imm = || run_imm(&ukf_bank);
    let run_fit = || -> Result<FitPass> {
        let spec = ResidualSpec::new(Arc::new(bc.measurement(2)));
        let start = DVector::from_column_slice(&bc.prior_mean[..2]);
        let mut tracker = Tracker::new(stf, spec)?.with_seed(straight_line_seed(bc, stf.order)?);
        tracker.seed_anchor(0.0, start.clone())?;
        let steps = ys.iter().enumerate().map(|(i, y)| {
            let t = bc.time(i + 1);
            let batch = (0..y.len()).map(|s| Observation::scalar(t, s as u32, y[s])).collect();
            (t, batch, start.clone())
        });
        FitPass::run(tracker, steps)
    };

    let mut ekf_imm: Cached<ImmFilter> = Cached::new();
    let mut ukf_imm: Cached<ImmFilter> = Cached::new();
    let mut fits: Cached<FitPass> = Cached::new();
    let mut estimates = Vec::with_capacity(cfg.estimators.len());
    for name in &cfg.estimators {
        // Shared passes are charged to every estimator that reads them.
        let shared = match name.as_str() {
            n if n.starts_with("ekf-imm") => ekf_imm.get(cfg.timing, &run_ekf_imm)?.1,
            n if n.starts_with("ukf-imm") => ukf_imm.get(cfg.timing, &run_ukf_imm)?.1,
            n if n.starts_with("fit-") => fits.get(cfg.timing, &run_fit)?.1,
            _ => 0.0,
        };
        let clock = Clock::start(cfg.timing);
        let values = match name.as_str() {
            "ekf" => leading(&filter_pass(&prior4, &wpv, &meas4, &ys, FilterKind::Extended)?.filtered, 2),
            "eks" => {
                let pass = filter_pass(&prior4, &wpv, &meas4, &ys, FilterKind::Extended)?;
                leading(&rts_smooth(&pass, &wpv)?, 2)
            }
            "ukf" => leading(&filter_pass(&prior4, &wpv, &meas4, &ys, ukf)?.filtered, 2),
            "uks" => {
                let pass = filter_pass(&prior4, &wpv, &meas4, &ys, ukf)?;
                leading(&urts_smooth(&pass, &wpv, &SigmaParams::default())?, 2)
            }
            n if n.contains("-imm") => {
                let (bank, cache, compute): (_, _, &dyn Fn() -> Result<ImmFilter>) = if n.starts_with("ekf") {
                    (&ekf_bank, &mut ekf_imm, &run_ekf_imm)
                } else {
                    (&ukf_bank, &mut ukf_imm, &run_ukf_imm)
                };
                let (f, _) = cache.get(cfg.timing, compute)?;
                if n.ends_with("-smoother") {
                    leading(&f.smooth()?, 2)
                } else if n.ends_with("-forecast") {
                    leading(&imm_forecasts(bank, &prior5, &f.records, stf.horizon_steps)?, 2)
                } else {
                    f.records.iter().map(|r| r.combined.mean.rows(0, 2).into_owned()).collect()
                }
            }
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

/// Straight flight from the prior position at the prior velocity, used to
/// seed the first nonlinear fit.
fn straight_line_seed(bc: &BearingsConfig, order: usize) -> Result<FotParams> {
    let coeffs = (0..2)
        .map(|axis| {
            let mut c = DVector::zeros(order);
            c[0] = bc.prior_mean[axis];
            if order > 1 {
                c[1] = bc.prior_mean[axis + 2];
            }
            c
        })
        .collect();
    Ok(FotParams::new(coeffs, BasisSpec::monomial(order), 0.0, (0.0, 0.0))?)
}

/// Five-state WPV (turn rate reset to zero) and coordinated turn, each
/// with its backward-time dynamics for two-filter smoothing.
fn imm_bank(bc: &BearingsConfig, kind: FilterKind) -> Result<ImmBank> {
    let meas = Arc::new(bc.measurement(5));
    let stay = bc.mode_stay;
    let transition = DMatrix::from_row_slice(2, 2, &[stay, 1.0 - stay, 1.0 - stay, stay]);
    Ok(ImmBank::new(
        vec![
            ImmModel::new(Arc::new(bc.wpv_model_with_rate()), meas.clone(), kind)
                .with_reverse(Arc::new(bc.wpv_model_with_rate().reversed())),
            ImmModel::new(Arc::new(bc.turn_model()), meas, kind).with_reverse(Arc::new(bc.turn_model().reversed())),
        ],
        transition,
        DVector::from_column_slice(&bc.mode_prior),
    )?)
}
