//! Monte-Carlo orchestration and RMSE aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stf_scenarios::{rmse, RunResult};

use crate::config::CampaignConfig;
use crate::error::{BenchError, Result};
use crate::pipelines;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub estimator: String,
    pub mean_rmse: f64,
    /// Mean wall time per run; zero when timing is off.
    pub mean_time_s: f64,
    /// RMSE at steps 1, 2, ...
    pub per_step: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub scenario: u8,
    pub runs: usize,
    pub seed: u64,
    pub rows: Vec<EstimatorRow>,
}

impl CampaignReport {
    pub fn row(&self, estimator: &str) -> Option<&EstimatorRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// Mean RMSE of `estimator`; panics when it was not run.
    pub fn mean(&self, estimator: &str) -> f64 {
        self.row(estimator).unwrap_or_else(|| panic!("estimator {estimator} missing from report")).mean_rmse
    }
}

/// One run of the configured scenario.
pub fn run_once(config: &CampaignConfig, run: usize) -> Result<RunResult> {
    let result = match config.scenario {
        1 => pipelines::linear::run(config, run)?,
        2 => pipelines::bearings::run(config, run)?,
        3 => pipelines::ballistic::run(config, run)?,
        other => return Err(BenchError::Invalid(format!("unknown scenario {other}"))),
    };
    result.validate()?;
    Ok(result)
}

/// Runs every Monte-Carlo replicate and aggregates per estimator. Runs are
/// independent and collected in run order, so the report does not depend
/// on the thread count.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport> {
    let config = config.clone().normalized()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<RunResult> =
        pool.install(|| (0..config.runs).into_par_iter().map(|r| run_once(&config, r)).collect::<Result<_>>())?;
    aggregate(&config, &results)
}

fn aggregate(config: &CampaignConfig, results: &[RunResult]) -> Result<CampaignReport> {
    let runs = results.len();
    let mut rows = Vec::with_capacity(config.estimators.len());
    for (i, name) in config.estimators.iter().enumerate() {
        let mut estimates = Vec::with_capacity(runs);
        let mut truths = Vec::with_capacity(runs);
        let mut time = 0.0;
        for r in results {
            let series = &r.estimates[i];
            debug_assert_eq!(&series.name, name);
            truths.push(r.projected_truth(&series.components));
            estimates.push(series.values.clone());
            time += series.wall_time_s;
        }
        let stats = rmse(&estimates, &truths)?;
        rows.push(EstimatorRow {
            estimator: name.clone(),
            mean_rmse: stats.mean,
            mean_time_s: time / runs as f64,
            per_step: stats.per_step,
        });
    }
    Ok(CampaignReport { scenario: config.scenario, runs, seed: config.seed, rows })
}
