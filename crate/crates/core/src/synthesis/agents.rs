use super::SynthesisError;
use crate::data::YearMonth;
use crate::density::StudentT;
use std::collections::HashSet;

/// Rectangular `T x J` table of agent forecast densities for consecutive
/// target dates, all built for the same horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDensities {
    names: Vec<String>,
    horizon: usize,
    dates: Vec<YearMonth>,
    /// Row-major, `densities[t * J + j]`.
    densities: Vec<StudentT>,
}

impl AgentDensities {
    pub fn new(
        names: Vec<String>,
        horizon: usize,
        dates: Vec<YearMonth>,
        rows: Vec<Vec<StudentT>>,
    ) -> Result<Self, SynthesisError> {
        if names.is_empty() {
            return Err(SynthesisError::Shape("at least one agent is required".into()));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(SynthesisError::Shape("agent names must be unique".into()));
        }
        if dates.len() != rows.len() {
            return Err(SynthesisError::Shape(format!("{} dates for {} density rows", dates.len(), rows.len())));
        }
        let j = names.len();
        let mut densities = Vec::with_capacity(rows.len() * j);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != j {
                return Err(SynthesisError::Shape(format!("row {t} has {} densities, expected {j}", row.len())));
            }
            densities.extend(row);
        }
        Ok(Self { names, horizon, dates, densities })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn row(&self, t: usize) -> &[StudentT] {
        let j = self.n_agents();
        &self.densities[t * j..(t + 1) * j]
    }

    pub fn get(&self, t: usize, j: usize) -> &StudentT {
        &self.densities[t * self.n_agents() + j]
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let j = self.n_agents();
        Self {
            names: self.names.clone(),
            horizon: self.horizon,
            dates: self.dates[start..end].to_vec(),
            densities: self.densities[start * j..end * j].to_vec(),
        }
    }

    /// Columns reordered so that new column `c` is old column `order[c]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        let j = self.n_agents();
        let mut densities = Vec::with_capacity(self.densities.len());
        for t in 0..self.len() {
            densities.extend(order.iter().map(|&c| self.densities[t * j + c]));
        }
        Self {
            names: order.iter().map(|&c| self.names[c].clone()).collect(),
            horizon: self.horizon,
            dates: self.dates.clone(),
            densities,
        }
    }

    /// Permutation that sorts agents by name.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_agents()).collect();
        order.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        order
    }
}
