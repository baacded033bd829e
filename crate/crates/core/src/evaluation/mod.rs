//! Forecast scoring (RMSFE, cumulative log predictive density ratios) and
//! Monte-Carlo R² dependency diagnostics on latent agent states.

mod metrics;
mod r2;

pub use metrics::{read_metrics, relative_rmse_pct, write_metrics, MetricsRow};
pub use r2::{mc_r2_full, mc_r2_pairwise, R2Series};

use crate::data::YearMonth;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no forecast records")]
    Empty,
    #[error("record {index} is misaligned: {left} (h={left_h}) vs {right} (h={right_h})")]
    Misaligned { index: usize, left: YearMonth, right: YearMonth, left_h: usize, right_h: usize },
    #[error("{0} and {1} records have different lengths")]
    Length(usize, usize),
    #[error("need at least {needed} draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("{0}")]
    Shape(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One scored forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub date: YearMonth,
    pub model: String,
    pub horizon: usize,
    /// Point forecast (predictive mean).
    pub mean: f64,
    pub realized: f64,
    pub log_density: f64,
}

impl ForecastRecord {
    pub fn squared_error(&self) -> f64 {
        (self.realized - self.mean).powi(2)
    }
}

/// Root mean squared error of point forecasts.
pub fn rmsfe(records: &[ForecastRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let sse: f64 = records.iter().map(ForecastRecord::squared_error).sum();
    Ok((sse / records.len() as f64).sqrt())
}

/// Running sum of `log p_model(y) - log p_ref(y)` over aligned records.
pub fn lpdr_series(model: &[ForecastRecord], reference: &[ForecastRecord]) -> Result<Vec<(YearMonth, f64)>, EvalError> {
    if model.len() != reference.len() {
        return Err(EvalError::Length(model.len(), reference.len()));
    }
    let mut acc = 0.0;
    model
        .iter()
        .zip(reference)
        .enumerate()
        .map(|(index, (m, r))| {
            if m.date != r.date || m.horizon != r.horizon {
                return Err(EvalError::Misaligned {
                    index,
                    left: m.date,
                    right: r.date,
                    left_h: m.horizon,
                    right_h: r.horizon,
                });
            }
            acc += m.log_density - r.log_density;
            Ok((m.date, acc))
        })
        .collect()
}
