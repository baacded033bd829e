use super::{DataError, GroupPartition, TimeSeriesPanel, YearMonth};
use nalgebra::{DMatrix, DVector};

/// Direct `k`-step regression design for one group: row `i` pairs the target
/// at date `t = dates[i]` with that group's predictors dated `t - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSlice {
    pub name: String,
    pub horizon: usize,
    pub intercept: bool,
    /// Target dates, one per row.
    pub dates: Vec<YearMonth>,
    pub target: Vec<f64>,
    /// `rows x (intercept + predictors)` regressors.
    pub design: DMatrix<f64>,
}

impl SupervisedSlice {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_regressors(&self) -> usize {
        self.design.ncols()
    }

    pub fn regressors(&self, row: usize) -> DVector<f64> {
        self.design.row(row).transpose()
    }

    /// Row index of target date `date`, if present.
    pub fn row_of(&self, date: YearMonth) -> Option<usize> {
        let offset = date.ordinal() - self.dates.first()?.ordinal();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }
}

/// Regressor vector `(1?, x_{t})` built from panel row `t` for the given columns.
/// This is the design row of target date `t + k`.
pub fn regressors_at(panel: &TimeSeriesPanel, columns: &[usize], t: usize, intercept: bool) -> DVector<f64> {
    let lead = usize::from(intercept);
    DVector::from_fn(lead + columns.len(), |i, _| {
        if intercept && i == 0 {
            1.0
        } else {
            panel.predictor_column(columns[i - lead])[t]
        }
    })
}

pub fn build_design(
    panel: &TimeSeriesPanel,
    name: &str,
    columns: &[usize],
    k: usize,
    intercept: bool,
) -> Result<SupervisedSlice, DataError> {
    if k == 0 {
        return Err(DataError::Horizon(k));
    }
    if panel.len() < k + 2 {
        return Err(DataError::TooShort { rows: panel.len(), horizon: k });
    }
    let rows = panel.len() - k;
    let lead = usize::from(intercept);
    let mut design = DMatrix::zeros(rows, lead + columns.len());
    for r in 0..rows {
        let x = regressors_at(panel, columns, r, intercept);
        design.set_row(r, &x.transpose());
    }
    Ok(SupervisedSlice {
        name: name.to_string(),
        horizon: k,
        intercept,
        dates: panel.dates()[k..].to_vec(),
        target: panel.target()[k..].to_vec(),
        design,
    })
}

/// One lag-`k` slice per group, in partition order.
pub fn build_supervised(
    panel: &TimeSeriesPanel,
    partition: &GroupPartition,
    k: usize,
    intercept: bool,
) -> Result<Vec<SupervisedSlice>, DataError> {
    partition
        .groups()
        .iter()
        .map(|g| build_design(panel, &g.name, &g.columns, k, intercept))
        .collect()
}
