use super::EvalError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One row of the metrics table.
///
/// `rmsfe_pct_vs_reference` is `100 (RMSFE_ref - RMSFE_model) / RMSFE_model`;
/// `lpdr_final` is the cumulative log density ratio of the model against the
/// reference, so both are negative when the reference is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub horizon: usize,
    pub rmsfe: f64,
    pub rmsfe_pct_vs_reference: f64,
    pub lpdr_final: f64,
}

pub fn relative_rmse_pct(rmse_model: f64, rmse_reference: f64) -> f64 {
    100.0 * (rmse_reference - rmse_model) / rmse_model
}

fn io(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| io(path, e))).collect()
}
