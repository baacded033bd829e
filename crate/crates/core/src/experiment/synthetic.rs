//! Synthetic panels with known structure for smoke runs and acceptance studies.

use super::{
    DataSection, ExperimentConfig, ExperimentError, LassoSection, PcaSection, PortfolioSection, Splits,
    SynthesisSection, DEFAULT_MODELS,
};
use crate::data::{write_panel, DataError, GroupMapping, TimeSeriesPanel, YearMonth};
use crate::dlm::FilterSettings;
use crate::rng::{stream, stream_id};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 120 months, 3 groups of 3 predictors.
    Small,
    /// 240 months, 8 groups of 4 predictors.
    Desk,
    /// 270 months, 6 groups whose signals are partial views of the target,
    /// with drifting loadings and large within-group nuisance factors.
    Partial,
    /// Target driven by one group at lag 1 and another at lag 3.
    Horizon,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Small, Preset::Desk, Preset::Partial, Preset::Horizon];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Small => "small",
            Preset::Desk => "desk",
            Preset::Partial => "partial",
            Preset::Horizon => "horizon",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (known: small, desk, partial, horizon)"))
    }
}

/// A generated panel with its group mapping and default split dates.
#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub preset: Preset,
    pub panel: TimeSeriesPanel,
    pub mapping: GroupMapping,
    pub splits: Splits,
}

const START: (i32, u32) = (1990, 1);
/// Targets are monthly log excess returns of roughly this size.
const RETURN_SCALE: f64 = 0.04;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn ar1<R: Rng>(rng: &mut R, n: usize, phi: f64) -> Vec<f64> {
    let sd = (1.0 - phi * phi).sqrt();
    let mut x = normal(rng);
    (0..n)
        .map(|_| {
            let out = x;
            x = phi * x + sd * normal(rng);
            out
        })
        .collect()
}

fn dates(n: usize) -> Vec<YearMonth> {
    let start = YearMonth::new(START.0, START.1).expect("valid start");
    (0..n).map(|i| start.add_months(i as i64)).collect()
}

fn splits(train: usize, calibration: usize, total: usize) -> Splits {
    let d = dates(total);
    Splits { train_end: d[train - 1], calibration_end: d[train + calibration - 1], evaluation_end: d[total - 1] }
}

fn risk_free<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    ar1(rng, n, 0.95).into_iter().map(|z| 0.003 + 0.001 * z).collect()
}

/// Group `j` sees signal `s_j` through its first predictor, plus `extra`
/// predictors loading on a group nuisance factor. The target at `t` loads on
/// every `s_j` at `t - 1` with slowly drifting loadings.
fn grouped(rng: &mut impl Rng, n: usize, groups: usize, extra: usize, nuisance: f64, drift: f64) -> (Vec<f64>, Vec<(String, Vec<f64>)>, GroupMapping) {
    let common = ar1(rng, n, 0.8);
    let signals: Vec<Vec<f64>> = (0..groups)
        .map(|_| {
            let own = ar1(rng, n, 0.5);
            common.iter().zip(&own).map(|(c, o)| 0.6 * c + 0.8 * o).collect()
        })
        .collect();
    let phases: Vec<f64> = (0..groups).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let period = rng.random_range(90.0..150.0);
    let mut y = vec![0.5 * normal(rng); n];
    let mut vol = 1.0f64;
    for t in 1..n {
        let mut mean = 0.0;
        for (j, s) in signals.iter().enumerate() {
            let w = 0.5 + drift * (std::f64::consts::TAU * t as f64 / period + phases[j]).sin();
            mean += w * s[t - 1];
        }
        vol = (0.97 * vol.ln() + 0.15 * normal(rng)).exp();
        y[t] = mean / (groups as f64).sqrt() + 0.5 * vol * normal(rng);
    }
    let mut predictors = Vec::new();
    let mut mapping = GroupMapping::default();
    for (j, s) in signals.iter().enumerate() {
        let name = format!("g{}", j + 1);
        let mut cols = Vec::new();
        let bias = 0.5 * normal(rng);
        let x0: Vec<f64> = s.iter().map(|v| v + bias + 0.3 * normal(rng)).collect();
        cols.push((format!("{name}_signal"), x0));
        let factor = ar1(rng, n, 0.9);
        for e in 0..extra {
            let load = 1.0 + 0.2 * normal(rng);
            let col: Vec<f64> = factor.iter().map(|f| nuisance * load * f + 0.5 * normal(rng)).collect();
            cols.push((format!("{name}_x{}", e + 1), col));
        }
        mapping.groups.push((name, cols.iter().map(|(c, _)| c.clone()).collect()));
        predictors.extend(cols);
    }
    (y, predictors, mapping)
}

/// One persistent signal `mu` drives the target through a drifting loading.
/// Group `j` observes `mu + bias_j + size_j u_j + 3 f_j + noise` in its first
/// predictor: `u_j` is a group-specific distortion (mild for half the groups,
/// heavy for the rest), and `f_j` a large group nuisance factor that the
/// group's other predictors measure. No group sees the truth, the group views
/// are correlated through `mu`, and the dominant principal components of the
/// panel are nuisance.
fn distorted(rng: &mut impl Rng, n: usize, groups: usize, extra: usize) -> (Vec<f64>, Vec<(String, Vec<f64>)>, GroupMapping) {
    let mu = ar1(rng, n, 0.95);
    let period = rng.random_range(60.0..100.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut y = vec![0.5 * normal(rng); n];
    let mut vol = 1.0f64;
    for t in 1..n {
        let load = 1.0 + 0.8 * (std::f64::consts::TAU * t as f64 / period + phase).sin();
        vol = (0.97 * vol.ln() + 0.15 * normal(rng)).exp();
        y[t] = load * mu[t - 1] + 0.3 * vol * normal(rng);
    }
    let mut sizes: Vec<f64> = (0..groups).map(|j| if 2 * j < groups { 1.0 } else { (2 * j + 2 - groups) as f64 }).collect();
    for j in (1..groups).rev() {
        sizes.swap(j, rng.random_range(0..=j));
    }
    let mut predictors = Vec::new();
    let mut mapping = GroupMapping::default();
    for (j, size) in sizes.into_iter().enumerate() {
        let name = format!("g{}", j + 1);
        let bias = normal(rng);
        let u = ar1(rng, n, 0.5);
        let factor = ar1(rng, n, 0.9);
        let x0: Vec<f64> = (0..n).map(|t| mu[t] + bias + size * u[t] + 3.0 * factor[t] + 0.2 * normal(rng)).collect();
        let mut cols = vec![(format!("{name}_signal"), x0)];
        for e in 0..extra {
            let load = 1.0 + 0.2 * normal(rng);
            let col: Vec<f64> = factor.iter().map(|f| 3.0 * load * f + 0.2 * normal(rng)).collect();
            cols.push((format!("{name}_x{}", e + 1), col));
        }
        mapping.groups.push((name, cols.iter().map(|(c, _)| c.clone()).collect()));
        predictors.extend(cols);
    }
    (y, predictors, mapping)
}

fn assemble<R: Rng>(
    rng: &mut R,
    y: Vec<f64>,
    predictors: Vec<(String, Vec<f64>)>,
) -> Result<TimeSeriesPanel, DataError> {
    let n = y.len();
    let target: Vec<f64> = y.iter().map(|v| RETURN_SCALE * v).collect();
    let (names, cols): (Vec<String>, Vec<Vec<f64>>) = predictors.into_iter().unzip();
    TimeSeriesPanel::new(dates(n), "y", target, names, cols, Some(("rf".into(), risk_free(rng, n))))
}

/// Generate the panel of `preset` under `seed`.
pub fn generate(preset: Preset, seed: u64) -> SyntheticPanel {
    let mut rng = stream(seed, stream_id(&[0x5917, preset as u64]));
    let (y, predictors, mapping, split) = match preset {
        Preset::Small => {
            let n = 120;
            let (y, p, m) = grouped(&mut rng, n, 3, 2, 2.0, 0.3);
            (y, p, m, splits(36, 36, n))
        }
        Preset::Desk => {
            let n = 240;
            let (y, p, m) = grouped(&mut rng, n, 8, 3, 2.0, 0.3);
            (y, p, m, splits(60, 60, n))
        }
        Preset::Partial => {
            let n = 270;
            let (y, p, m) = distorted(&mut rng, n, 6, 3);
            (y, p, m, splits(48, 72, n))
        }
        Preset::Horizon => {
            let n = 220;
            let z: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
            let w: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
            let y = (0..n)
                .map(|t| {
                    let a = if t >= 1 { 0.9 * z[t - 1] } else { 0.0 };
                    let b = if t >= 3 { 0.9 * w[t - 3] } else { 0.0 };
                    a + b + 0.4 * normal(&mut rng)
                })
                .collect();
            let mapping = GroupMapping {
                groups: vec![("a".into(), vec!["z".into()]), ("b".into(), vec!["w".into()])],
                ..GroupMapping::default()
            };
            (y, vec![("z".into(), z), ("w".into(), w)], mapping, splits(40, 60, n))
        }
    };
    let panel = assemble(&mut rng, y, predictors).expect("generated panel is valid");
    SyntheticPanel { preset, panel, mapping, splits: split }
}

/// Path of the group mapping written next to a panel file: `<stem>_groups.txt`.
pub fn groups_path(panel_path: &Path) -> PathBuf {
    let stem = panel_path.file_stem().and_then(|s| s.to_str()).unwrap_or("panel");
    panel_path.with_file_name(format!("{stem}_groups.txt"))
}

impl SyntheticPanel {
    /// Write the panel CSV and its group mapping; returns the mapping path.
    pub fn write(&self, panel_path: &Path) -> Result<PathBuf, ExperimentError> {
        if let Some(dir) = panel_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)
                .map_err(|e| ExperimentError::Io { path: dir.to_path_buf(), message: e.to_string() })?;
        }
        write_panel(&self.panel, panel_path)?;
        let groups = groups_path(panel_path);
        std::fs::write(&groups, self.mapping.to_text())
            .map_err(|e| ExperimentError::Io { path: groups.clone(), message: e.to_string() })?;
        Ok(groups)
    }

    /// A runnable configuration for this panel (reduced MCMC sizes).
    pub fn config(&self, panel_path: &Path, output_dir: &Path, seed: u64) -> ExperimentConfig {
        let mut synthesis = SynthesisSection { burn_in: 300, n_saved: 500, ..SynthesisSection::default() };
        let mut agents = FilterSettings::default();
        let mut horizons = vec![1];
        let mut models: Vec<String> = DEFAULT_MODELS.iter().map(|s| s.to_string()).collect();
        match self.preset {
            Preset::Small => {}
            Preset::Desk => {
                synthesis.burn_in = 500;
                synthesis.n_saved = 1000;
                synthesis.refit_every = 3;
            }
            Preset::Partial => {
                agents.delta = 0.97;
            }
            Preset::Horizon => {
                horizons = vec![3];
                models = vec!["drs".into(), "drs_direct".into()];
            }
        }
        ExperimentConfig {
            seed,
            output_dir: output_dir.to_path_buf(),
            horizons,
            models,
            data: DataSection {
                panel: panel_path.to_path_buf(),
                groups: groups_path(panel_path),
                target: "y".into(),
                risk_free: Some("rf".into()),
                intercept: true,
            },
            splits: self.splits,
            agents,
            full_model: FilterSettings::default(),
            synthesis,
            lasso: LassoSection::default(),
            pca: PcaSection::default(),
            portfolio: PortfolioSection { draws: 1000, ..PortfolioSection::default() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_panel, partition_groups, PanelSchema};

    #[test]
    fn presets_parse_and_are_seeded() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("huge".parse::<Preset>().is_err());
        let a = generate(Preset::Small, 3);
        let b = generate(Preset::Small, 3);
        let c = generate(Preset::Small, 4);
        assert_eq!(a.panel, b.panel);
        assert_ne!(a.panel, c.panel);
    }

    #[test]
    fn shapes() {
        let desk = generate(Preset::Desk, 0);
        assert_eq!(desk.panel.len(), 240);
        assert_eq!(desk.mapping.groups.len(), 8);
        assert!(desk.mapping.groups.iter().all(|(_, c)| c.len() == 4));
        let small = generate(Preset::Small, 0);
        assert_eq!((small.panel.len(), small.mapping.groups.len()), (120, 3));
    }

    #[test]
    fn written_files_reload() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate(Preset::Horizon, 1);
        let path = dir.path().join("h.csv");
        let groups = s.write(&path).unwrap();
        assert_eq!(groups, dir.path().join("h_groups.txt"));
        let panel = load_panel(&path, &PanelSchema::new("y").with_risk_free("rf")).unwrap();
        assert_eq!(panel, s.panel);
        let mapping = GroupMapping::load(&groups).unwrap();
        assert_eq!(partition_groups(&panel, &mapping).unwrap().len(), 2);
    }
}
