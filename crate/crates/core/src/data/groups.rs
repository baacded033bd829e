use super::{DataError, TimeSeriesPanel};
use std::collections::HashSet;
use std::path::Path;

/// Reserved mapping key whose columns are deliberately left out of every group.
/// `ignore: [*]` ignores every predictor not assigned elsewhere.
pub const IGNORE_KEY: &str = "ignore";

/// Parsed group-mapping file.
///
/// One group per line, `name: [column, column, ...]`. Blank lines and `#`
/// comments are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupMapping {
    pub groups: Vec<(String, Vec<String>)>,
    pub ignored: Vec<String>,
    pub ignore_rest: bool,
}

impl GroupMapping {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut mapping = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| DataError::Mapping { line: line_no, message: msg.to_string() };
            let (name, rest) = line.split_once(':').ok_or_else(|| bad("expected `name: [columns]`"))?;
            let name = name.trim().trim_matches('"').to_string();
            if name.is_empty() {
                return Err(bad("empty group name"));
            }
            let rest = rest.trim();
            let inner = rest
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| bad("column list must be enclosed in [ ]"))?;
            let columns: Vec<String> = inner
                .split(',')
                .map(|c| c.trim().trim_matches('"').trim_matches('\'').to_string())
                .filter(|c| !c.is_empty())
                .collect();
            if name == IGNORE_KEY {
                for c in columns {
                    if c == "*" {
                        mapping.ignore_rest = true;
                    } else {
                        mapping.ignored.push(c);
                    }
                }
            } else {
                if mapping.groups.iter().any(|(n, _)| *n == name) {
                    return Err(bad("group listed twice"));
                }
                mapping.groups.push((name, columns));
            }
        }
        Ok(mapping)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, cols) in &self.groups {
            out.push_str(&format!("{name}: [{}]\n", cols.join(", ")));
        }
        if !self.ignored.is_empty() || self.ignore_rest {
            let mut cols = self.ignored.clone();
            if self.ignore_rest {
                cols.push("*".to_string());
            }
            out.push_str(&format!("{IGNORE_KEY}: [{}]\n", cols.join(", ")));
        }
        out
    }
}

/// One predictor group with panel column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub predictors: Vec<String>,
    pub columns: Vec<usize>,
}

/// Disjoint, non-empty, ordered partition of predictors into `J` groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Group>,
}

impl GroupPartition {
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    /// All mapped predictors as a single group (full-model baseline).
    pub fn merged(&self, name: &str) -> GroupPartition {
        let group = Group {
            name: name.to_string(),
            predictors: self.groups.iter().flat_map(|g| g.predictors.clone()).collect(),
            columns: self.groups.iter().flat_map(|g| g.columns.clone()).collect(),
        };
        GroupPartition { groups: vec![group] }
    }
}

pub fn partition_groups(panel: &TimeSeriesPanel, mapping: &GroupMapping) -> Result<GroupPartition, DataError> {
    if mapping.groups.is_empty() {
        return Err(DataError::EmptyGroup("<no groups>".to_string()));
    }
    let mut assigned = HashSet::new();
    let mut groups = Vec::with_capacity(mapping.groups.len());
    for (name, cols) in &mapping.groups {
        if cols.is_empty() {
            return Err(DataError::EmptyGroup(name.clone()));
        }
        let mut columns = Vec::with_capacity(cols.len());
        for c in cols {
            let idx = panel
                .predictor_index(c)
                .ok_or_else(|| DataError::UnknownPredictor(c.clone()))?;
            if !assigned.insert(c.clone()) {
                return Err(DataError::DuplicateAssignment(c.clone()));
            }
            columns.push(idx);
        }
        groups.push(Group { name: name.clone(), predictors: cols.clone(), columns });
    }
    for c in &mapping.ignored {
        if panel.predictor_index(c).is_none() {
            return Err(DataError::UnknownPredictor(c.clone()));
        }
        if assigned.contains(c) {
            return Err(DataError::DuplicateAssignment(c.clone()));
        }
    }
    if !mapping.ignore_rest {
        if let Some(unmapped) = panel
            .predictor_names()
            .iter()
            .find(|n| !assigned.contains(*n) && !mapping.ignored.contains(n))
        {
            return Err(DataError::UnmappedPredictor(unmapped.clone()));
        }
    }
    Ok(GroupPartition { groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::YearMonth;

    fn panel(names: &[&str]) -> TimeSeriesPanel {
        let n = 4;
        let dates = (0..n).map(|i| YearMonth::new(2000, 1).unwrap().add_months(i)).collect();
        TimeSeriesPanel::new(
            dates,
            "y",
            vec![0.0; n as usize],
            names.iter().map(|s| s.to_string()).collect(),
            vec![vec![1.0; n as usize]; names.len()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_groups_of_two() {
        let p = panel(&["a", "b", "c", "d"]);
        let m = GroupMapping::parse("g1: [a, b]\ng2: [c, d]\n").unwrap();
        let part = partition_groups(&p, &m).unwrap();
        assert_eq!(part.len(), 2);
        assert_eq!(part.groups()[1].columns, vec![2, 3]);
    }

    #[test]
    fn duplicate_assignment_is_rejected() {
        let p = panel(&["a", "b"]);
        let m = GroupMapping::parse("g1: [a, b]\ng2: [a]\n").unwrap();
        assert_eq!(partition_groups(&p, &m), Err(DataError::DuplicateAssignment("a".into())));
    }

    #[test]
    fn unknown_and_unmapped_and_empty() {
        let p = panel(&["a", "b"]);
        let m = GroupMapping::parse("g1: [a, z]").unwrap();
        assert_eq!(partition_groups(&p, &m), Err(DataError::UnknownPredictor("z".into())));
        let m = GroupMapping::parse("g1: [a]").unwrap();
        assert_eq!(partition_groups(&p, &m), Err(DataError::UnmappedPredictor("b".into())));
        let m = GroupMapping::parse("g1: [a]\nignore: [b]").unwrap();
        assert_eq!(partition_groups(&p, &m).unwrap().len(), 1);
        let m = GroupMapping::parse("g1: [a]\nignore: [*]").unwrap();
        assert_eq!(partition_groups(&p, &m).unwrap().len(), 1);
        let m = GroupMapping::parse("g1: [a, b]\ng2: []").unwrap();
        assert_eq!(partition_groups(&p, &m), Err(DataError::EmptyGroup("g2".into())));
    }

    #[test]
    fn eight_macro_categories() {
        let names: Vec<String> = (0..16).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let p = panel(&refs);
        let categories = [
            "Output and Income",
            "Labor Market",
            "Consumption and Orders",
            "Orders and Inventories",
            "Money and Credit",
            "Interest Rate and Exchange Rates",
            "Prices",
            "Stock Market",
        ];
        let text: String = categories
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c}: [x{}, x{}]\n", 2 * i, 2 * i + 1))
            .collect();
        let part = partition_groups(&p, &GroupMapping::parse(&text).unwrap()).unwrap();
        assert_eq!(part.len(), 8);
        assert_eq!(part.names()[5], "Interest Rate and Exchange Rates");
    }

    #[test]
    fn mapping_text_round_trips() {
        let m = GroupMapping::parse("# comment\ng1: [a, b]  # trailing\n\nignore: [c, *]\n").unwrap();
        assert_eq!(GroupMapping::parse(&m.to_text()).unwrap(), m);
    }
}
