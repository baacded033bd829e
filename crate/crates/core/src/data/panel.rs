use super::{DataError, YearMonth};
use std::collections::HashSet;
use std::path::Path;

/// Column declaration for [`load_panel`].
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSchema {
    /// Name of the target column.
    pub target: String,
    /// Optional risk-free rate column (kept aside, never used as a predictor).
    pub risk_free: Option<String>,
    /// Predictor columns to load; `None` loads every remaining column.
    pub predictors: Option<Vec<String>>,
}

impl PanelSchema {
    pub fn new(target: impl Into<String>) -> Self {
        Self { target: target.into(), risk_free: None, predictors: None }
    }

    pub fn with_risk_free(mut self, column: impl Into<String>) -> Self {
        self.risk_free = Some(column.into());
        self
    }
}

/// Balanced monthly panel of one target and named predictors.
///
/// Dates are strictly increasing with one-month spacing and every value is
/// finite. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    dates: Vec<YearMonth>,
    target_name: String,
    target: Vec<f64>,
    predictor_names: Vec<String>,
    predictors: Vec<Vec<f64>>,
    risk_free: Option<(String, Vec<f64>)>,
}

impl TimeSeriesPanel {
    pub fn new(
        dates: Vec<YearMonth>,
        target_name: impl Into<String>,
        target: Vec<f64>,
        predictor_names: Vec<String>,
        predictors: Vec<Vec<f64>>,
        risk_free: Option<(String, Vec<f64>)>,
    ) -> Result<Self, DataError> {
        let n = dates.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        validate_dates(&dates)?;
        if predictor_names.len() != predictors.len() {
            return Err(DataError::Shape(format!(
                "{} predictor names for {} columns",
                predictor_names.len(),
                predictors.len()
            )));
        }
        let target_name = target_name.into();
        let mut seen = HashSet::new();
        seen.insert(target_name.as_str());
        if let Some((name, _)) = &risk_free {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        for name in &predictor_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        let check = |name: &str, col: &[f64]| -> Result<(), DataError> {
            if col.len() != n {
                return Err(DataError::Shape(format!("column `{name}` has {} rows, expected {n}", col.len())));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DataError::MissingValue { row: row + 1, column: name.to_string() });
            }
            Ok(())
        };
        check(&target_name, &target)?;
        for (name, col) in predictor_names.iter().zip(&predictors) {
            check(name, col)?;
        }
        if let Some((name, col)) = &risk_free {
            check(name, col)?;
        }
        Ok(Self { dates, target_name, target, predictor_names, predictors, risk_free })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn predictor_names(&self) -> &[String] {
        &self.predictor_names
    }

    pub fn predictor(&self, name: &str) -> Option<&[f64]> {
        self.predictor_index(name).map(|i| self.predictors[i].as_slice())
    }

    pub fn predictor_index(&self, name: &str) -> Option<usize> {
        self.predictor_names.iter().position(|n| n == name)
    }

    pub fn predictor_column(&self, index: usize) -> &[f64] {
        &self.predictors[index]
    }

    pub fn risk_free(&self) -> Option<&[f64]> {
        self.risk_free.as_ref().map(|(_, v)| v.as_slice())
    }

    pub fn date_index(&self, date: YearMonth) -> Option<usize> {
        let offset = date.ordinal() - self.dates[0].ordinal();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    /// Copy with every predictor replaced by its expanding-window z-score:
    /// the value at `t` is standardized with the mean and standard deviation
    /// of observations `0..=t`. Rows with zero spread map to 0.
    pub fn zscored_expanding(&self) -> Self {
        let predictors = self
            .predictors
            .iter()
            .map(|col| {
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                col.iter()
                    .enumerate()
                    .map(|(t, &x)| {
                        sum += x;
                        sum_sq += x * x;
                        let n = (t + 1) as f64;
                        let mean = sum / n;
                        let var = if t == 0 { 0.0 } else { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) };
                        if var > 0.0 {
                            (x - mean) / var.sqrt()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self { predictors, ..self.clone() }
    }

    /// Copy with the target replaced (same dates and predictors).
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self, DataError> {
        Self::new(
            self.dates.clone(),
            self.target_name.clone(),
            target,
            self.predictor_names.clone(),
            self.predictors.clone(),
            self.risk_free.clone(),
        )
    }

    /// Copy with one predictor column replaced.
    pub fn with_predictor(&self, index: usize, values: Vec<f64>) -> Result<Self, DataError> {
        let mut predictors = self.predictors.clone();
        predictors[index] = values;
        Self::new(
            self.dates.clone(),
            self.target_name.clone(),
            self.target.clone(),
            self.predictor_names.clone(),
            predictors,
            self.risk_free.clone(),
        )
    }
}

fn validate_dates(dates: &[YearMonth]) -> Result<(), DataError> {
    for (i, pair) in dates.windows(2).enumerate() {
        let row = i + 2;
        let (prev, cur) = (pair[0], pair[1]);
        if cur == prev {
            return Err(DataError::DuplicateDate { row, date: cur });
        }
        if cur < prev {
            return Err(DataError::NonIncreasingDate { row, date: cur });
        }
        let expected = prev.add_months(1);
        if cur != expected {
            return Err(DataError::DateGap { row, expected, found: cur });
        }
    }
    Ok(())
}

/// Load a panel from CSV: header row, first column `date` (`YYYY-MM`), numeric
/// columns after it. Row numbers in errors count data rows from 1.
pub fn load_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<TimeSeriesPanel, DataError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::io(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.first().map(String::as_str) != Some("date") {
        return Err(DataError::MissingColumn("date".to_string()));
    }
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(DataError::DuplicateColumn(h.clone()));
        }
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let target_idx = find(&schema.target)?;
    let rf_idx = schema.risk_free.as_deref().map(find).transpose()?;
    let predictor_names: Vec<String> = match &schema.predictors {
        Some(names) => names.clone(),
        None => headers
            .iter()
            .skip(1)
            .filter(|h| **h != schema.target && Some(h.as_str()) != schema.risk_free.as_deref())
            .cloned()
            .collect(),
    };
    let predictor_idx = predictor_names.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;

    let mut dates = Vec::new();
    let mut target = Vec::new();
    let mut rf = Vec::new();
    let mut predictors = vec![Vec::new(); predictor_names.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Malformed { row, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(DataError::Malformed {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let date: YearMonth = record[0]
            .parse()
            .map_err(|_| DataError::BadDate { row, value: record[0].to_string() })?;
        let cell = |idx: usize| parse_cell(&record[idx], row, &headers[idx]);
        dates.push(date);
        target.push(cell(target_idx)?);
        if let Some(idx) = rf_idx {
            rf.push(cell(idx)?);
        }
        for (col, &idx) in predictors.iter_mut().zip(&predictor_idx) {
            col.push(cell(idx)?);
        }
    }
    TimeSeriesPanel::new(
        dates,
        schema.target.clone(),
        target,
        predictor_names,
        predictors,
        schema.risk_free.clone().map(|name| (name, rf)),
    )
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64, DataError> {
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Err(DataError::MissingValue { row, column: column.to_string() });
    }
    let v: f64 = raw.parse().map_err(|_| DataError::BadCell {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::MissingValue { row, column: column.to_string() });
    }
    Ok(v)
}

/// Write a panel in the format read by [`load_panel`]. Values use the shortest
/// round-trip decimal representation, so reloading is bit-exact.
pub fn write_panel(panel: &TimeSeriesPanel, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::io(path, e))?;
    let mut header = vec!["date".to_string(), panel.target_name.clone()];
    if let Some((name, _)) = &panel.risk_free {
        header.push(name.clone());
    }
    header.extend(panel.predictor_names.iter().cloned());
    w.write_record(&header).map_err(|e| DataError::io(path, e))?;
    for t in 0..panel.len() {
        let mut rec = vec![panel.dates[t].to_string(), panel.target[t].to_string()];
        if let Some((_, col)) = &panel.risk_free {
            rec.push(col[t].to_string());
        }
        rec.extend(panel.predictors.iter().map(|c| c[t].to_string()));
        w.write_record(&rec).map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))?;
    Ok(())
}
