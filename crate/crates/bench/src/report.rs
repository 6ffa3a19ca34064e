//! CSV and JSON report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::CampaignReport;
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits: exact for every double.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-step companion written next to a summary CSV.
pub fn steps_path(summary: &Path) -> PathBuf {
    summary.with_file_name("steps.csv")
}

/// Writes the report. CSV output also writes `steps.csv` beside `path`.
pub fn emit_report(report: &CampaignReport, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => {
            write_csv(path, summary_records(report))?;
            write_csv(&steps_path(path), step_records(report))
        }
        Format::Json => {
            let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
            let mut out = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| BenchError::io(path, e))
        }
    }
}

pub fn read_json_report(path: &Path) -> Result<CampaignReport> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn summary_records(report: &CampaignReport) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["estimator".into(), "mean_rmse".into(), "mean_time_s".into()]];
    rows.extend(
        report.rows.iter().map(|r| vec![r.estimator.clone(), format_number(r.mean_rmse), format_number(r.mean_time_s)]),
    );
    rows
}

fn step_records(report: &CampaignReport) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["step".into(), "estimator".into(), "rmse".into()]];
    for r in &report.rows {
        for (k, v) in r.per_step.iter().enumerate() {
            rows.push(vec![(k + 1).to_string(), r.estimator.clone(), format_number(*v)]);
        }
    }
    rows
}

fn write_csv(path: &Path, records: Vec<Vec<String>>) -> Result<()> {
    let csv_err = |source| BenchError::Csv { path: path.display().to_string(), source };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    for record in records {
        writer.write_record(&record).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| BenchError::io(path, e))
}
