use super::report::write_reports;
use super::{ExperimentConfig, ExperimentError};
use crate::baselines::{
    bma_step, equal_weight_pool, historical_average, lambda_grid, lambda_max, lasso_fit, lasso_loo_select,
    lasso_predictive_density, pc_regression_density, pca_decompose, BmaState, LinearPool,
};
use crate::data::{
    build_design, load_panel, partition_groups, regressors_at, GroupMapping, GroupPartition, PanelSchema,
    TimeSeriesPanel, YearMonth,
};
use crate::density::StudentT;
use crate::dlm::{k_step_densities, DiscountConfig, FilterSettings};
use crate::evaluation::ForecastRecord;
use crate::portfolio::optimal_weight;
use crate::rng::{stream, stream_id};
use crate::synthesis::{predict_k_step, run_gibbs, AgentDensities, ForecastMode, PredictiveSample, SynthesisFit};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// File left in the output directory while a run is in progress or after it failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

const STREAM_FIT: u64 = 1;
const STREAM_PREDICT: u64 = 2;
const STREAM_PORTFOLIO: u64 = 3;

/// Forecasts of one model at one horizon, aligned with [`HorizonResults::dates`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSeries {
    pub name: String,
    pub records: Vec<ForecastRecord>,
    /// Optimal `(unconstrained, no-short)` weights per date, when the
    /// portfolio study ran for this horizon.
    pub weights: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonResults {
    pub horizon: usize,
    /// Evaluation target dates.
    pub dates: Vec<YearMonth>,
    pub realized: Vec<f64>,
    pub risk_free: Vec<f64>,
    /// `drs` first.
    pub models: Vec<ModelSeries>,
    pub group_names: Vec<String>,
    /// On-line posterior means of the terminal synthesis coefficients at each
    /// refit origin (intercept first, groups in mapping order).
    pub coefficients: Vec<(YearMonth, DVector<f64>)>,
    /// Final-origin synthesis fit with retained draw paths.
    pub final_fit: Option<SynthesisFit>,
}

impl HorizonResults {
    pub fn model(&self, name: &str) -> Option<&ModelSeries> {
        self.models.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub horizons: Vec<HorizonResults>,
    /// Evaluation-window start (exclusive) used for diagnostics.
    pub calibration_end: YearMonth,
}

/// Any forecast representation the models produce.
enum Predictive {
    T(StudentT),
    Pool(LinearPool),
    Sample(PredictiveSample),
}

impl Predictive {
    fn mean(&self) -> f64 {
        match self {
            Predictive::T(d) => d.mean(),
            Predictive::Pool(p) => p.mean(),
            Predictive::Sample(s) => s.mean(),
        }
    }

    fn ln_pdf(&self, y: f64) -> f64 {
        match self {
            Predictive::T(d) => d.ln_pdf(y),
            Predictive::Pool(p) => p.ln_pdf(y),
            Predictive::Sample(s) => s.ln_pdf(y),
        }
    }

    fn draws(&self, n: usize, rng: &mut crate::rng::StreamRng) -> Vec<f64> {
        match self {
            Predictive::T(d) => (0..n).map(|_| d.sample(rng)).collect(),
            Predictive::Pool(p) => (0..n).map(|_| p.sample(rng)).collect(),
            Predictive::Sample(s) => s.samples.clone(),
        }
    }
}

/// Panel indices of the splits.
#[derive(Debug, Clone, Copy)]
struct SplitIndex {
    train: usize,
    calibration: usize,
    evaluation: usize,
}

impl SplitIndex {
    fn new(panel: &TimeSeriesPanel, cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let find = |name: &str, d: YearMonth| {
            panel.date_index(d).ok_or_else(|| {
                ExperimentError::Config(format!(
                    "split {name} = {d} is outside the panel ({} to {})",
                    panel.dates()[0],
                    panel.dates()[panel.len() - 1]
                ))
            })
        };
        let s = &cfg.splits;
        let idx = Self {
            train: find("train_end", s.train_end)?,
            calibration: find("calibration_end", s.calibration_end)?,
            evaluation: find("evaluation_end", s.evaluation_end)?,
        };
        for &k in &cfg.horizons {
            if idx.train + 1 < k {
                return Err(ExperimentError::Config(format!("training period is shorter than horizon {k}")));
            }
            if idx.calibration < idx.train + k + 1 {
                return Err(ExperimentError::Config(format!(
                    "calibration period must contain at least {} months at horizon {k}",
                    k + 1
                )));
            }
        }
        Ok(idx)
    }
}

/// k-step densities of every group, indexed by target panel row.
struct AgentBank {
    k: usize,
    names: Vec<String>,
    /// `per_group[g][d - k]` forecasts target row `d`.
    per_group: Vec<Vec<StudentT>>,
}

impl AgentBank {
    fn new(
        panel: &TimeSeriesPanel,
        partition: &GroupPartition,
        k: usize,
        settings: &FilterSettings,
        intercept: bool,
    ) -> Result<Self, ExperimentError> {
        let disc = settings.discount().map_err(|e| ExperimentError::Config(e.to_string()))?;
        let per_group = partition
            .groups()
            .par_iter()
            .map(|g| {
                let slice = build_design(panel, &g.name, &g.columns, k, intercept)?;
                let prior = settings.prior(slice.n_regressors()).map_err(|e| ExperimentError::Config(e.to_string()))?;
                k_step_densities(&slice, &prior, &disc).map_err(|e| ExperimentError::phase("agents", &g.name, None, e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { k, names: partition.names(), per_group })
    }

    fn row(&self, d: usize) -> Vec<StudentT> {
        self.per_group.iter().map(|g| g[d - self.k]).collect()
    }

    /// Table for target rows `first..=last`.
    fn table(&self, panel: &TimeSeriesPanel, first: usize, last: usize) -> AgentDensities {
        let rows = (first..=last).map(|d| self.row(d)).collect();
        AgentDensities::new(self.names.clone(), self.k, panel.dates()[first..=last].to_vec(), rows)
            .expect("rectangular bank")
    }
}

fn rng_for(seed: u64, parts: &[u64]) -> crate::rng::StreamRng {
    stream(seed, stream_id(parts))
}

fn name_code(name: &str) -> u64 {
    // FNV-1a, stable across platforms
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Compute every forecast of the experiment (no file output).
pub fn run_on_panel(
    cfg: &ExperimentConfig,
    panel: &TimeSeriesPanel,
    partition: &GroupPartition,
) -> Result<ExperimentResults, ExperimentError> {
    cfg.validate()?;
    let split = SplitIndex::new(panel, cfg)?;
    let risk_free: Vec<f64> = match panel.risk_free() {
        Some(rf) => rf.to_vec(),
        None => {
            if cfg.portfolio.enabled {
                log::warn!("no risk-free column; portfolio study uses r_f = 0");
            }
            vec![0.0; panel.len()]
        }
    };
    let mut banks: BTreeMap<usize, AgentBank> = BTreeMap::new();
    let mut needed: Vec<usize> = cfg.horizons.clone();
    if cfg.synthesis.mode == ForecastMode::Direct || cfg.has_model("drs_direct") {
        needed.push(1);
    }
    needed.sort_unstable();
    needed.dedup();
    let clock = Instant::now();
    for k in needed {
        banks.insert(k, AgentBank::new(panel, partition, k, &cfg.agents, cfg.data.intercept)?);
    }
    log::info!("phase 1 (agent filters): {:.1?}", clock.elapsed());

    let horizons = cfg
        .horizons
        .iter()
        .map(|&k| run_horizon(cfg, panel, partition, &banks, split, k, &risk_free))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentResults { horizons, calibration_end: cfg.splits.calibration_end })
}

/// Synthesis fits at the refit origins, keyed by origin row.
fn synthesis_fits(
    cfg: &ExperimentConfig,
    panel: &TimeSeriesPanel,
    bank: &AgentBank,
    split: SplitIndex,
    origins: &[usize],
    model: &str,
) -> Result<BTreeMap<usize, SynthesisFit>, ExperimentError> {
    let m = cfg.synthesis.refit_every;
    let last = origins.len() - 1;
    let refits: Vec<(usize, bool)> = origins
        .iter()
        .enumerate()
        .filter(|(i, _)| i % m == 0 || *i == last)
        .map(|(i, &t)| (t, i == last))
        .collect();
    let first = split.train + 1;
    let fits = refits
        .par_iter()
        .map(|&(t, is_last)| {
            let date = panel.dates()[t];
            let gibbs = cfg.synthesis.gibbs(is_last && bank.names.len() >= 2)?;
            let agents = bank.table(panel, first, t);
            let y = &panel.target()[first..=t];
            let mut rng = rng_for(cfg.seed, &[bank.k as u64, date.ordinal() as u64, STREAM_FIT, name_code(model)]);
            run_gibbs(&agents, y, &gibbs, &mut rng)
                .map(|fit| (t, fit))
                .map_err(|e| ExperimentError::phase("synthesis", model, Some(date), e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(fits.into_iter().collect())
}

fn standardize_window(x: &DMatrix<f64>) -> (Vec<usize>, DVector<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let mut keep = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        if var > 0.0 {
            keep.push(j);
            means.push(mean);
            sds.push(var.sqrt());
        }
    }
    (keep, DVector::from_vec(means), DVector::from_vec(sds))
}

fn lasso_forecast(
    cfg: &ExperimentConfig,
    window: &DMatrix<f64>,
    y: &[f64],
    x_new: &[f64],
) -> Result<StudentT, String> {
    let (keep, means, sds) = standardize_window(window);
    if keep.is_empty() {
        return historical_average(y).map_err(|e| e.to_string());
    }
    let z = DMatrix::from_fn(window.nrows(), keep.len(), |i, c| (window[(i, keep[c])] - means[c]) / sds[c]);
    let z_new: Vec<f64> = keep.iter().enumerate().map(|(c, &j)| (x_new[j] - means[c]) / sds[c]).collect();
    let grid = lambda_grid(lambda_max(&z, y), cfg.lasso.grid_size, cfg.lasso.grid_ratio);
    let selected = lasso_loo_select(&z, y, &grid).map_err(|e| e.to_string())?;
    let fit = lasso_fit(&z, y, selected.lambda).map_err(|e| e.to_string())?;
    Ok(lasso_predictive_density(&fit, &z_new))
}

fn run_horizon(
    cfg: &ExperimentConfig,
    panel: &TimeSeriesPanel,
    partition: &GroupPartition,
    banks: &BTreeMap<usize, AgentBank>,
    split: SplitIndex,
    k: usize,
    risk_free: &[f64],
) -> Result<HorizonResults, ExperimentError> {
    let clock = Instant::now();
    let bank = &banks[&k];
    let targets: Vec<usize> = (split.calibration + 1..=split.evaluation).collect();
    let origins: Vec<usize> = targets.iter().map(|d| d - k).collect();
    let first = split.train + 1;

    // synthesis
    let drs_bank = match cfg.synthesis.mode {
        ForecastMode::Customized => bank,
        ForecastMode::Direct => &banks[&1],
    };
    let drs_fits = synthesis_fits(cfg, panel, drs_bank, split, &origins, "drs")?;
    let direct_fits = if cfg.has_model("drs_direct") && k > 1 {
        Some(synthesis_fits(cfg, panel, &banks[&1], split, &origins, "drs_direct")?)
    } else {
        None
    };
    log::info!("phase 2 (synthesis, h={k}): {} fits in {:.1?}", drs_fits.len(), clock.elapsed());

    // bma weights: state after each target row from `first`
    let bma_states = if cfg.has_model("bma") {
        let mut states = Vec::with_capacity(split.evaluation + 1 - first);
        let mut state = BmaState::uniform(partition.len());
        for d in first..=split.evaluation {
            let (next, _) = bma_step(&state, &bank.row(d), panel.target()[d])
                .map_err(|e| ExperimentError::phase("baselines", "bma", Some(panel.dates()[d]), e))?;
            state = next;
            states.push(state.clone());
        }
        Some(states)
    } else {
        None
    };

    let all_columns: Vec<usize> = partition.groups().iter().flat_map(|g| g.columns.clone()).collect();
    let full_dens = if cfg.has_model("full") {
        let merged = partition.merged("full");
        let group = &merged.groups()[0];
        let slice = build_design(panel, "full", &group.columns, k, cfg.data.intercept)?;
        let prior = cfg.full_model.prior(slice.n_regressors()).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let disc = cfg.full_model.discount().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Some(k_step_densities(&slice, &prior, &disc).map_err(|e| ExperimentError::phase("baselines", "full", None, e))?)
    } else {
        None
    };
    let pca_disc = DiscountConfig::new(cfg.pca.delta, cfg.pca.beta).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let allocations = if cfg.portfolio.enabled && k == 1 { Some(cfg.portfolio.allocations()?) } else { None };

    let fit_origin = |t: usize, fits: &BTreeMap<usize, SynthesisFit>| -> usize {
        *fits.range(..=t).next_back().expect("a fit at or before every origin").0
    };

    let per_date = targets
        .par_iter()
        .zip(origins.par_iter())
        .map(|(&d, &t)| -> Result<Vec<(String, Predictive)>, ExperimentError> {
            let date = panel.dates()[d];
            let mut out: Vec<(String, Predictive)> = Vec::new();
            let agents_now = bank.row(d);
            let drs_pred = |fits: &BTreeMap<usize, SynthesisFit>, mode: ForecastMode, name: &str| {
                let f = fit_origin(t, fits);
                let mut rng = rng_for(cfg.seed, &[k as u64, date.ordinal() as u64, STREAM_PREDICT, name_code(name)]);
                predict_k_step(&fits[&f], &agents_now, mode, k, t - f, cfg.synthesis.replication, &mut rng)
                    .map_err(|e| ExperimentError::phase("forecast", name, Some(date), e))
            };
            out.push(("drs".into(), Predictive::Sample(drs_pred(&drs_fits, cfg.synthesis.mode, "drs")?)));
            if let Some(fits) = &direct_fits {
                out.push(("drs_direct".into(), Predictive::Sample(drs_pred(fits, ForecastMode::Direct, "drs_direct")?)));
            }
            if cfg.has_model("ew") {
                out.push(("ew".into(), Predictive::Pool(equal_weight_pool(&agents_now, 0.0).1)));
            }
            if let Some(states) = &bma_states {
                let state = if t >= first { states[t - first].clone() } else { BmaState::uniform(partition.len()) };
                out.push(("bma".into(), Predictive::Pool(state.pool(&agents_now))));
            }
            let need_window = cfg.has_model("lasso") || cfg.has_model("pca");
            if need_window {
                // regressor rows for targets k..=t, and the row for target d
                let rows = t + 1 - k;
                let window = DMatrix::from_fn(rows, all_columns.len(), |i, c| panel.predictor_column(all_columns[c])[i]);
                let y = &panel.target()[k..=t];
                let x_new: Vec<f64> = regressors_at(panel, &all_columns, t, false).iter().copied().collect();
                if cfg.has_model("lasso") {
                    let dens = lasso_forecast(cfg, &window, y, &x_new)
                        .map_err(|e| ExperimentError::phase("baselines", "lasso", Some(date), e))?;
                    out.push(("lasso".into(), Predictive::T(dens)));
                }
                if cfg.has_model("pca") {
                    let n_factors = cfg.pca.n_factors.min(all_columns.len()).min(rows);
                    let dens = pca_decompose(&window, n_factors)
                        .and_then(|model| {
                            pc_regression_density(&model, &window, y, &x_new, k, cfg.pca.n0, cfg.pca.s0, &pca_disc)
                        })
                        .map_err(|e| ExperimentError::phase("baselines", "pca", Some(date), e))?;
                    out.push(("pca".into(), Predictive::T(dens)));
                }
            }
            if let Some(dens) = &full_dens {
                out.push(("full".into(), Predictive::T(dens[d - k])));
            }
            if cfg.has_model("ha") {
                let dens = historical_average(&panel.target()[..=t])
                    .map_err(|e| ExperimentError::phase("baselines", "ha", Some(date), e))?;
                out.push(("ha".into(), Predictive::T(dens)));
            }
            if cfg.has_model("agents") {
                for (name, dens) in bank.names.iter().zip(&agents_now) {
                    out.push((format!("agent:{name}"), Predictive::T(*dens)));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("phase 3 (forecasts, h={k}): {:.1?}", clock.elapsed());

    // portfolio weights, then records
    let names: Vec<String> = per_date[0].iter().map(|(n, _)| n.clone()).collect();
    let weights: Option<Vec<Vec<(f64, f64)>>> = match allocations {
        Some((unc, ns)) => Some(
            per_date
                .par_iter()
                .zip(targets.par_iter())
                .map(|(preds, &d)| {
                    let date = panel.dates()[d];
                    preds
                        .iter()
                        .map(|(name, p)| {
                            let mut rng = rng_for(
                                cfg.seed,
                                &[k as u64, date.ordinal() as u64, STREAM_PORTFOLIO, name_code(name)],
                            );
                            let draws = p.draws(cfg.portfolio.draws, &mut rng);
                            let rf = risk_free[d];
                            let w = optimal_weight(&draws, rf, &unc)
                                .and_then(|a| optimal_weight(&draws, rf, &ns).map(|b| (a, b)));
                            w.map_err(|e| ExperimentError::phase("portfolio", name, Some(date), e))
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let models = names
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let records = targets
                .iter()
                .zip(&per_date)
                .map(|(&d, preds)| {
                    let y = panel.target()[d];
                    let p = &preds[m].1;
                    let record = ForecastRecord {
                        date: panel.dates()[d],
                        model: name.clone(),
                        horizon: k,
                        mean: p.mean(),
                        realized: y,
                        log_density: p.ln_pdf(y),
                    };
                    if !record.log_density.is_finite() || !record.mean.is_finite() {
                        return Err(ExperimentError::phase(
                            "evaluation",
                            name,
                            Some(record.date),
                            format!("non-finite score (mean {}, log density {})", record.mean, record.log_density),
                        ));
                    }
                    Ok(record)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ModelSeries {
                name: name.clone(),
                records,
                weights: weights.as_ref().map(|w| w.iter().map(|row| row[m]).collect()),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let group_names = partition.names();
    let coefficients = drs_fits
        .iter()
        .map(|(&t, fit)| (panel.dates()[t], fit.terminal_theta_mean()))
        .collect();
    let final_fit = drs_fits.into_iter().next_back().map(|(_, f)| f);
    log::info!("horizon {k} done in {:.1?}", clock.elapsed());
    Ok(HorizonResults {
        horizon: k,
        dates: targets.iter().map(|&d| panel.dates()[d]).collect(),
        realized: targets.iter().map(|&d| panel.target()[d]).collect(),
        risk_free: targets.iter().map(|&d| risk_free[d]).collect(),
        models,
        group_names,
        coefficients,
        final_fit,
    })
}

/// Load data, run every model, write all report files into the output directory.
///
/// An `INCOMPLETE` marker is present while running and stays (with the error
/// message) if the run fails; on success it is replaced by `manifest.txt`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<std::path::PathBuf>, ExperimentError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let io = |p: &Path, e: std::io::Error| ExperimentError::Io { path: p.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let marker = out.join(INCOMPLETE_MARKER);
    std::fs::write(&marker, "run in progress\n").map_err(|e| io(&marker, e))?;
    let _ = std::fs::remove_file(out.join("manifest.txt"));
    let result = (|| {
        let clock = Instant::now();
        let mut schema = PanelSchema::new(cfg.data.target.clone());
        if let Some(rf) = &cfg.data.risk_free {
            schema = schema.with_risk_free(rf.clone());
        }
        let panel = load_panel(&cfg.data.panel, &schema)?;
        let mapping = GroupMapping::load(&cfg.data.groups)?;
        let partition = partition_groups(&panel, &mapping)?;
        log::info!(
            "loaded {} rows, {} predictors in {} groups ({:.1?})",
            panel.len(),
            panel.predictor_names().len(),
            partition.len(),
            clock.elapsed()
        );
        let results = run_on_panel(cfg, &panel, &partition)?;
        let files = write_reports(&results, cfg, out)?;
        log::info!("phase 4 (reports): {} files, total {:.1?}", files.len(), clock.elapsed());
        Ok(files)
    })();
    match result {
        Ok(mut files) => {
            files.sort();
            let manifest = out.join("manifest.txt");
            let text: String = files
                .iter()
                .map(|f| format!("{}\n", f.strip_prefix(out).unwrap_or(f).display()))
                .collect();
            std::fs::write(&manifest, text).map_err(|e| io(&manifest, e))?;
            std::fs::remove_file(&marker).map_err(|e| io(&marker, e))?;
            Ok(files)
        }
        Err(e) => {
            let _ = std::fs::write(&marker, format!("run failed: {e}\n"));
            Err(e)
        }
    }
}
