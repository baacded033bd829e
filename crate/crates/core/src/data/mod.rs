//! Panel loading, group partitioning and horizon-aligned designs.

mod date;
mod groups;
mod panel;
mod supervised;

pub use date::{ParseDateError, YearMonth};
pub use groups::{partition_groups, Group, GroupMapping, GroupPartition, IGNORE_KEY};
pub use panel::{load_panel, write_panel, PanelSchema, TimeSeriesPanel};
pub use supervised::{build_design, build_supervised, regressors_at, SupervisedSlice};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("panel has no rows")]
    Empty,
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadCell { row: usize, column: String, value: String },
    #[error("row {row}, column `date`: cannot parse `{value}` as YYYY-MM")]
    BadDate { row: usize, value: String },
    #[error("row {row}, column `date`: duplicate date {date}")]
    DuplicateDate { row: usize, date: YearMonth },
    #[error("row {row}, column `date`: {date} is earlier than the previous row")]
    NonIncreasingDate { row: usize, date: YearMonth },
    #[error("row {row}, column `date`: gap in dates, expected {expected} found {found}")]
    DateGap { row: usize, expected: YearMonth, found: YearMonth },
    #[error("{0}")]
    Shape(String),
    #[error("group mapping line {line}: {message}")]
    Mapping { line: usize, message: String },
    #[error("unknown predictor `{0}` in group mapping")]
    UnknownPredictor(String),
    #[error("predictor `{0}` is mapped more than once")]
    DuplicateAssignment(String),
    #[error("predictor `{0}` is not assigned to any group (list it under `ignore` to skip it)")]
    UnmappedPredictor(String),
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("horizon must be at least 1, got {0}")]
    Horizon(usize),
    #[error("panel of {rows} rows is too short for horizon {horizon} (need at least horizon + 2)")]
    TooShort { rows: usize, horizon: usize },
}

impl DataError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        DataError::Io { path: path.to_path_buf(), message: err.to_string() }
    }
}
