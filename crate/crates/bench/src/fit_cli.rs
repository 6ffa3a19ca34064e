//! File-level operations behind `stf fit` and `stf scenarios export`.

use std::path::Path;

use nalgebra::DVector;
use stf_core::{Observation, QueryMode, ResidualSpec, StfConfig, Tracker};
use stf_scenarios::export::{export_rows, Row};
use stf_scenarios::{ballistic, bearings, linear};

use crate::config::CampaignConfig;
use crate::error::{BenchError, Result};
use crate::pipelines::fitting::FitPass;
use crate::report::format_number;
use crate::streams::{stream, Role};

/// Reads `time,sensor_id,dim0..` rows. Extra leading columns such as
/// `step` are ignored; rows must be in nondecreasing time order.
pub fn read_observations(path: &Path) -> Result<Vec<Observation>> {
    let csv_err = |source| BenchError::Csv { path: path.display().to_string(), source };
    let invalid = |msg: String| BenchError::Config { path: path.display().to_string(), message: msg };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| header.iter().position(|h| h.trim() == name);
    let time_col = column("time").ok_or_else(|| invalid("missing `time` column".into()))?;
    let sensor_col = column("sensor_id").ok_or_else(|| invalid("missing `sensor_id` column".into()))?;
    let dim_cols: Vec<usize> = (0..).map_while(|d| column(&format!("dim{d}"))).collect();
    if dim_cols.is_empty() {
        return Err(invalid("no `dim0` column".into()));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let number =
            |i: usize| field(i).parse::<f64>().map_err(|e| invalid(format!("row {}: `{}`: {e}", line + 2, field(i))));
        let sensor = field(sensor_col)
            .parse::<u32>()
            .map_err(|e| invalid(format!("row {}: sensor_id `{}`: {e}", line + 2, field(sensor_col))))?;
        let value = dim_cols.iter().map(|&c| number(c)).collect::<Result<Vec<f64>>>()?;
        let obs = Observation::new(number(time_col)?, sensor, DVector::from_vec(value));
        if out.last().is_some_and(|p: &Observation| p.time > obs.time) {
            return Err(invalid(format!("row {}: time goes backwards", line + 2)));
        }
        out.push(obs);
    }
    if out.is_empty() {
        return Err(invalid("no observations".into()));
    }
    Ok(out)
}

/// Fits position observations directly (identity model) and returns one
/// `(time, estimate)` per distinct observation time.
pub fn fit_observations(
    observations: &[Observation],
    config: &StfConfig,
    mode: QueryMode,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let dims = observations[0].value.len();
    let tracker = Tracker::new(*config, ResidualSpec::identity(dims))?;
    let mut groups: Vec<(f64, Vec<Observation>)> = Vec::new();
    for obs in observations {
        match groups.last_mut() {
            Some((t, batch)) if *t == obs.time => batch.push(obs.clone()),
            _ => groups.push((obs.time, vec![obs.clone()])),
        }
    }
    let steps = groups.into_iter().map(|(t, batch)| {
        let fallback = batch[0].value.clone();
        (t, batch, fallback)
    });
    let pass = FitPass::run(tracker, steps)?;
    let estimates = match mode {
        QueryMode::Online => pass.online(),
        QueryMode::Delayed => pass.delayed(config.delay_steps),
        QueryMode::Smoothed => pass.smoothed(config)?,
        QueryMode::Forecast => pass.forecast(config.horizon_steps),
    };
    Ok(pass.times.iter().copied().zip(estimates).collect())
}

pub fn write_estimates(path: &Path, estimates: &[(f64, DVector<f64>)]) -> Result<()> {
    let csv_err = |source| BenchError::Csv { path: path.display().to_string(), source };
    let dims = estimates.first().map_or(0, |(_, x)| x.len());
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["time".to_string()];
    header.extend((0..dims).map(|d| format!("dim{d}")));
    writer.write_record(&header).map_err(csv_err)?;
    for (t, x) in estimates {
        let mut rec = vec![format_number(*t)];
        rec.extend(x.iter().map(|v| format_number(*v)));
        writer.write_record(&rec).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| BenchError::io(path, e))
}

/// Writes `truth.csv` and `observations.csv` for run 0 of a scenario with
/// default settings.
pub fn export_scenario(scenario: u8, seed: u64, out_dir: &Path) -> Result<()> {
    let config = CampaignConfig { seed, ..CampaignConfig::new(scenario) }.normalized()?;
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let mut noise = stream(seed, 0, Role::Noise);
    let (truth, observations): (Vec<DVector<f64>>, Vec<Row>) = match scenario {
        1 => {
            let c = &config.linear;
            let truth = linear::simulate_truth(c, &mut stream(seed, 0, Role::Truth));
            let obs = (1..truth.len())
                .map(|k| Row {
                    step: k,
                    time: c.time(k),
                    sensor_id: 0,
                    values: linear::observe(c, &truth[k], &mut noise),
                })
                .collect();
            (truth, obs)
        }
        2 => {
            let c = &config.bearings;
            let truth = bearings::simulate_truth(c);
            let mut obs = Vec::new();
            for k in 1..truth.len() {
                let y = bearings::observe(c, &truth[k], &mut noise);
                obs.extend(y.iter().enumerate().map(|(s, v)| Row {
                    step: k,
                    time: c.time(k),
                    sensor_id: s as u32,
                    values: DVector::from_element(1, *v),
                }));
            }
            (truth, obs)
        }
        _ => {
            let c = &config.ballistic;
            let truth = ballistic::simulate_truth(c);
            let obs = (1..truth.len())
                .map(|k| Row {
                    step: k,
                    time: k as f64,
                    sensor_id: 0,
                    values: DVector::from_element(1, ballistic::observe(c, &truth[k], &mut noise)),
                })
                .collect();
            (truth, obs)
        }
    };
    let dt = match scenario {
        1 => config.linear.dt,
        2 => config.bearings.dt,
        _ => 1.0,
    };
    let truth_rows: Vec<Row> = truth
        .into_iter()
        .enumerate()
        .map(|(k, x)| Row { step: k, time: k as f64 * dt, sensor_id: 0, values: x })
        .collect();
    export_rows(&out_dir.join("truth.csv"), &truth_rows)?;
    export_rows(&out_dir.join("observations.csv"), &observations)?;
    Ok(())
}
