//! Expanding-window forecasting experiments: configuration, orchestration,
//! report files and synthetic panels.

mod config;
mod report;
mod runner;
pub mod synthetic;

pub use config::{
    DataSection, ExperimentConfig, LassoSection, PcaSection, PortfolioSection, Splits, SynthesisSection, DEFAULT_MODELS,
    MODEL_IDS,
};
pub use report::{slug, write_reports};
pub use runner::{run_experiment, run_on_panel, ExperimentResults, HorizonResults, ModelSeries, INCOMPLETE_MARKER};

use crate::data::{DataError, YearMonth};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("{phase} / {model}{}: {message}", .date.map(|d| format!(" / {d}")).unwrap_or_default())]
    Phase { phase: &'static str, model: String, date: Option<YearMonth>, message: String },
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

impl ExperimentError {
    pub(crate) fn phase(phase: &'static str, model: &str, date: Option<YearMonth>, err: impl std::fmt::Display) -> Self {
        ExperimentError::Phase { phase, model: model.to_string(), date, message: err.to_string() }
    }

    /// Short category used for process exit codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) => 3,
            ExperimentError::Phase { .. } => 4,
            ExperimentError::Io { .. } => 5,
        }
    }
}
