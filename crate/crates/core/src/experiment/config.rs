use super::ExperimentError;
use crate::data::YearMonth;
use crate::dlm::FilterSettings;
use crate::portfolio::AllocationConfig;
use crate::synthesis::{ForecastMode, GibbsConfig, PriorMean};
use crate::dlm::DiscountConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Model identifiers accepted in `models`.
pub const MODEL_IDS: &[&str] = &["drs", "drs_direct", "ew", "bma", "lasso", "pca", "full", "ha", "agents"];
pub const DEFAULT_MODELS: &[&str] = &["drs", "ew", "bma", "lasso", "pca", "full", "ha", "agents"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    pub data: DataSection,
    pub splits: Splits,
    #[serde(default)]
    pub agents: FilterSettings,
    #[serde(default)]
    pub full_model: FilterSettings,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub lasso: LassoSection,
    #[serde(default)]
    pub pca: PcaSection,
    #[serde(default)]
    pub portfolio: PortfolioSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("drs-output")
}

fn default_horizons() -> Vec<usize> {
    vec![1]
}

fn default_models() -> Vec<String> {
    DEFAULT_MODELS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub panel: PathBuf,
    pub groups: PathBuf,
    pub target: String,
    #[serde(default)]
    pub risk_free: Option<String>,
    /// Intercept column in every dynamic regression.
    #[serde(default = "yes")]
    pub intercept: bool,
}

fn yes() -> bool {
    true
}

/// `train_end < calibration_end < evaluation_end`. Agent densities are kept
/// from `train_end + 1`; forecasts are scored for target dates in
/// `(calibration_end, evaluation_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train_end: YearMonth,
    pub calibration_end: YearMonth,
    pub evaluation_end: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub burn_in: usize,
    pub n_saved: usize,
    pub delta: f64,
    pub beta: f64,
    pub n0: f64,
    pub s0: f64,
    pub prior_mean: PriorMean,
    /// How `drs` produces forecasts beyond one step.
    pub mode: ForecastMode,
    /// Re-run the sampler every `refit_every` origins; in between the last
    /// fit is evolved forward.
    pub refit_every: usize,
    /// Predictive draws per saved iteration.
    pub replication: usize,
    /// Write every saved draw of the final fit per horizon.
    pub dump_draws: bool,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            burn_in: g.burn_in,
            n_saved: g.n_saved,
            delta: g.discount.delta(),
            beta: g.discount.beta(),
            n0: g.n0,
            s0: g.s0,
            prior_mean: g.prior_mean,
            mode: ForecastMode::Customized,
            refit_every: 1,
            replication: 1,
            dump_draws: false,
        }
    }
}

impl SynthesisSection {
    pub fn gibbs(&self, retain_paths: bool) -> Result<GibbsConfig, ExperimentError> {
        let discount = DiscountConfig::new(self.delta, self.beta).map_err(|e| ExperimentError::Config(format!("synthesis: {e}")))?;
        Ok(GibbsConfig {
            burn_in: self.burn_in,
            n_saved: self.n_saved,
            discount,
            n0: self.n0,
            s0: self.s0,
            prior_mean: self.prior_mean,
            retain_paths,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoSection {
    pub grid_size: usize,
    pub grid_ratio: f64,
}

impl Default for LassoSection {
    fn default() -> Self {
        Self { grid_size: 100, grid_ratio: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaSection {
    pub n_factors: usize,
    pub delta: f64,
    pub beta: f64,
    pub n0: f64,
    pub s0: f64,
}

impl Default for PcaSection {
    fn default() -> Self {
        let f = FilterSettings::default();
        Self { n_factors: 5, delta: f.delta, beta: f.beta, n0: f.n0, s0: f.s0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortfolioSection {
    pub enabled: bool,
    pub gamma: f64,
    pub step: f64,
    pub unconstrained: [f64; 2],
    pub no_short: [f64; 2],
    /// Draws taken from closed-form predictive densities.
    pub draws: usize,
}

impl Default for PortfolioSection {
    fn default() -> Self {
        Self { enabled: true, gamma: 5.0, step: 0.01, unconstrained: [-1.0, 2.0], no_short: [0.0, 1.0], draws: 3000 }
    }
}

impl PortfolioSection {
    pub fn allocations(&self) -> Result<(AllocationConfig, AllocationConfig), ExperimentError> {
        let make = |b: [f64; 2]| {
            AllocationConfig::new(self.gamma, b[0], b[1], self.step).map_err(|e| ExperimentError::Config(format!("portfolio: {e}")))
        };
        Ok((make(self.unconstrained)?, make(self.no_short)?))
    }
}

impl ExperimentConfig {
    /// Parse TOML; relative data paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.data.panel = base.join(&cfg.data.panel);
        cfg.data.groups = base.join(&cfg.data.groups);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that need no data.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let s = &self.splits;
        if !(s.train_end < s.calibration_end && s.calibration_end < s.evaluation_end) {
            return bad(format!(
                "splits must satisfy train_end < calibration_end < evaluation_end, got {} / {} / {}",
                s.train_end, s.calibration_end, s.evaluation_end
            ));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be a non-empty list of positive integers".into());
        }
        for m in &self.models {
            if !MODEL_IDS.contains(&m.as_str()) {
                return bad(format!("unknown model `{m}` (known: {})", MODEL_IDS.join(", ")));
            }
        }
        if !self.models.iter().any(|m| m == "drs") {
            return bad("`drs` is the reference model and must be enabled".into());
        }
        for (name, f) in [("agents", &self.agents), ("full_model", &self.full_model)] {
            f.discount().map_err(|e| ExperimentError::Config(format!("{name}: {e}")))?;
            if !(f.n0 > 0.0 && f.s0 > 0.0) {
                return bad(format!("{name}: n0 and s0 must be positive"));
            }
        }
        self.synthesis.gibbs(false)?.validate().map_err(|e| ExperimentError::Config(format!("synthesis: {e}")))?;
        if self.synthesis.refit_every == 0 || self.synthesis.replication == 0 {
            return bad("synthesis: refit_every and replication must be at least 1".into());
        }
        if self.lasso.grid_size == 0 || !(self.lasso.grid_ratio > 0.0 && self.lasso.grid_ratio < 1.0) {
            return bad("lasso: grid_size must be positive and grid_ratio in (0, 1)".into());
        }
        DiscountConfig::new(self.pca.delta, self.pca.beta).map_err(|e| ExperimentError::Config(format!("pca: {e}")))?;
        if self.pca.n_factors == 0 {
            return bad("pca: n_factors must be at least 1".into());
        }
        if self.portfolio.enabled {
            self.portfolio.allocations()?;
            if self.portfolio.draws == 0 {
                return bad("portfolio: draws must be at least 1".into());
            }
        }
        Ok(())
    }

    pub fn has_model(&self, id: &str) -> bool {
        self.models.iter().any(|m| m == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
[data]
panel = "panel.csv"
groups = "groups.txt"
target = "y"
[splits]
train_end = "2000-12"
calibration_end = "2003-12"
evaluation_end = "2009-12"
"#;

    #[test]
    fn defaults_follow_the_documented_values() {
        let cfg = ExperimentConfig::from_toml(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.data.panel, PathBuf::from("/data/panel.csv"));
        assert_eq!(cfg.horizons, vec![1]);
        assert_eq!((cfg.agents.delta, cfg.agents.beta, cfg.agents.n0, cfg.agents.s0), (0.99, 0.95, 10.0, 0.01));
        assert_eq!((cfg.synthesis.burn_in, cfg.synthesis.n_saved), (2000, 3000));
        assert_eq!(cfg.pca.n_factors, 5);
        assert_eq!(cfg.portfolio.gamma, 5.0);
    }

    #[test]
    fn split_order_is_enforced() {
        let text = MINIMAL.replace("train_end = \"2000-12\"", "train_end = \"2004-12\"");
        assert!(matches!(ExperimentConfig::from_toml(&text, Path::new(".")), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn unknown_keys_and_models_are_rejected() {
        let text = format!("{MINIMAL}\n[lasso]\ngrid = 3\n");
        assert!(ExperimentConfig::from_toml(&text, Path::new(".")).is_err());
        let text = MINIMAL.replace("seed = 7", "seed = 7\nmodels = [\"drs\", \"ridge\"]");
        assert!(ExperimentConfig::from_toml(&text, Path::new(".")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml(MINIMAL, Path::new("")).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml(), Path::new("")).unwrap();
        assert_eq!(cfg, again);
    }
}
