use std::path::Path;

use nalgebra::DVector;

use crate::error::{Result, ScenarioError};

/// One exported row: a sample at `time` from `sensor_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub step: usize,
    pub time: f64,
    pub sensor_id: u32,
    pub values: DVector<f64>,
}

/// Writes `step,time,sensor_id,dim0..dimD` rows.
pub fn write_rows<W: std::io::Write>(writer: W, rows: &[Row]) -> std::result::Result<(), csv::Error> {
    let dims = rows.iter().map(|r| r.values.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["step".to_string(), "time".into(), "sensor_id".into()];
    header.extend((0..dims).map(|d| format!("dim{d}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.step.to_string(), format_number(r.time), r.sensor_id.to_string()];
        rec.extend(r.values.iter().map(|v| format_number(*v)));
        rec.resize(3 + dims, String::new());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    write_rows(file, rows).map_err(|source| ScenarioError::Csv { path: path.display().to_string(), source })
}

/// Shortest decimal that round-trips the double exactly.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}
