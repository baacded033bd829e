use super::runner::{ExperimentResults, HorizonResults, ModelSeries};
use super::{ExperimentConfig, ExperimentError};
use crate::evaluation::{lpdr_series, mc_r2_full, mc_r2_pairwise, relative_rmse_pct, rmsfe, write_metrics, MetricsRow};
use crate::portfolio::{cer_aggregate, ccer_series, realized_utility_series, single_period_cers, WealthPath};
use nalgebra::DMatrix;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

const REFERENCE: &str = "drs";

/// File-name-safe form of a model or group name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

struct Writer {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
        ExperimentError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    fn create(&mut self, rel: &str) -> Result<(PathBuf, BufWriter<File>), ExperimentError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Self::err(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| Self::err(&path, e))?;
        self.files.push(path.clone());
        Ok((path, BufWriter::new(file)))
    }

    /// Write a delimited table; `rows` are already formatted cells.
    fn table(&mut self, rel: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), ExperimentError> {
        let (path, mut w) = self.create(rel)?;
        let mut put = |cells: &[String]| writeln!(w, "{}", cells.join(",")).map_err(|e| Self::err(&path, e));
        put(header)?;
        for row in rows {
            put(&row)?;
        }
        w.flush().map_err(|e| Self::err(&path, e))
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Write every report file under `out`; returns the paths written.
pub fn write_reports(
    results: &ExperimentResults,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut w = Writer { root: out.to_path_buf(), files: Vec::new() };
    let eval_err = |model: &str, e: crate::evaluation::EvalError| ExperimentError::phase("evaluation", model, None, e);

    let mut metrics = Vec::new();
    let mut forecasts = Vec::new();
    for h in &results.horizons {
        let reference = h.model(REFERENCE).expect("reference model always runs");
        let ref_rmse = rmsfe(&reference.records).map_err(|e| eval_err(REFERENCE, e))?;
        for m in &h.models {
            let rmse = rmsfe(&m.records).map_err(|e| eval_err(&m.name, e))?;
            let lpdr = lpdr_series(&m.records, &reference.records).map_err(|e| eval_err(&m.name, e))?;
            metrics.push(MetricsRow {
                model: m.name.clone(),
                horizon: h.horizon,
                rmsfe: rmse,
                rmsfe_pct_vs_reference: relative_rmse_pct(rmse, ref_rmse),
                lpdr_final: lpdr.last().map_or(0.0, |(_, v)| *v),
            });
            forecasts.extend(m.records.iter().map(|r| {
                vec![
                    h.horizon.to_string(),
                    r.date.to_string(),
                    r.model.clone(),
                    num(r.mean),
                    num(r.realized),
                    num(r.log_density),
                ]
            }));
            w.table(
                &format!("lpdr/h{}_{}.csv", h.horizon, slug(&m.name)),
                &header(&["date", "value"]),
                lpdr.iter().map(|(d, v)| vec![d.to_string(), num(*v)]),
            )?;
        }
        write_coefficients(&mut w, h)?;
        write_r2(&mut w, h, results)?;
        if cfg.synthesis.dump_draws {
            if let Some(fit) = &h.final_fit {
                let (path, mut file) = w.create(&format!("draws_h{}.csv", h.horizon))?;
                fit.write_draws(&mut file).and_then(|_| file.flush()).map_err(|e| Writer::err(&path, e))?;
            }
        }
        if h.models[0].weights.is_some() {
            write_portfolio(&mut w, h, cfg.portfolio.gamma)?;
        }
    }
    let metrics_path = out.join("metrics.csv");
    write_metrics(&metrics_path, &metrics).map_err(|e| Writer::err(&metrics_path, e))?;
    w.files.push(metrics_path);
    w.table(
        "forecasts.csv",
        &header(&["horizon", "date", "model", "mean", "realized", "log_density"]),
        forecasts,
    )?;
    let (path, mut file) = w.create("config.toml")?;
    file.write_all(cfg.to_toml().as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Writer::err(&path, e))?;
    Ok(w.files)
}

fn write_coefficients(w: &mut Writer, h: &HorizonResults) -> Result<(), ExperimentError> {
    let mut head = header(&["date", "intercept"]);
    head.extend(h.group_names.iter().cloned());
    w.table(
        &format!("coefficients_h{}.csv", h.horizon),
        &head,
        h.coefficients.iter().map(|(d, theta)| {
            std::iter::once(d.to_string()).chain(theta.iter().map(|v| num(*v))).collect()
        }),
    )
}

/// R² diagnostics of the final fit's latent states, restricted to the evaluation window.
fn write_r2(w: &mut Writer, h: &HorizonResults, results: &ExperimentResults) -> Result<(), ExperimentError> {
    let Some(fit) = &h.final_fit else { return Ok(()) };
    let Some(paths) = fit.paths() else { return Ok(()) };
    let j = fit.n_agents();
    if j < 2 {
        return Ok(());
    }
    let dates = fit.dates();
    let start = dates.iter().position(|d| *d > results.calibration_end).unwrap_or(dates.len());
    if start == dates.len() {
        return Ok(());
    }
    let draws: Vec<DMatrix<f64>> = paths.iter().map(|p| p.x.rows(start, dates.len() - start).into_owned()).collect();
    let window = &dates[start..];
    let err = |e| ExperimentError::phase("evaluation", "r2", None, e);
    let names = fit.names();
    for a in 0..j {
        let series = mc_r2_full(&draws, a).map_err(err)?;
        w.table(
            &format!("r2/h{}_full_{}.csv", h.horizon, slug(&names[a])),
            &header(&["date", "r2"]),
            window.iter().zip(&series.values).map(|(d, v)| vec![d.to_string(), num(*v)]),
        )?;
        for b in a + 1..j {
            let series = mc_r2_pairwise(&draws, a, b).map_err(err)?;
            w.table(
                &format!("r2/h{}_pair_{}__{}.csv", h.horizon, slug(&names[a]), slug(&names[b])),
                &header(&["date", "r2"]),
                window.iter().zip(&series.values).map(|(d, v)| vec![d.to_string(), num(*v)]),
            )?;
        }
    }
    Ok(())
}

fn wealth_path(h: &HorizonResults, m: &ModelSeries, no_short: bool, gamma: f64) -> Result<WealthPath, ExperimentError> {
    let weights: Vec<f64> = m
        .weights
        .as_ref()
        .expect("portfolio weights present")
        .iter()
        .map(|(u, n)| if no_short { *n } else { *u })
        .collect();
    realized_utility_series(&h.dates, &weights, &h.realized, &h.risk_free, gamma)
        .map_err(|e| ExperimentError::phase("portfolio", &m.name, None, e))
}

fn write_portfolio(w: &mut Writer, h: &HorizonResults, gamma: f64) -> Result<(), ExperimentError> {
    let reference = h.model(REFERENCE).expect("reference model always runs");
    let ref_paths = [wealth_path(h, reference, false, gamma)?, wealth_path(h, reference, true, gamma)?];
    let mut summary = Vec::new();
    for m in &h.models {
        let err = |e| ExperimentError::phase("portfolio", &m.name, None, e);
        let mut row = vec![m.name.clone()];
        let mut extra = Vec::new();
        for (variant, no_short) in [false, true].into_iter().enumerate() {
            let path = wealth_path(h, m, no_short, gamma)?;
            let suffix = if no_short { "_no_short" } else { "" };
            w.table(
                &format!("portfolio/{}{suffix}.csv", slug(&m.name)),
                &header(&["date", "weight", "realized_wealth", "realized_utility"]),
                (0..path.dates.len()).map(|i| {
                    vec![path.dates[i].to_string(), num(path.weights[i]), num(path.wealth[i]), num(path.utility[i])]
                }),
            )?;
            let cer = cer_aggregate(&path, &ref_paths[variant], gamma).map_err(err)?;
            let singles = single_period_cers(&path, &ref_paths[variant], gamma).map_err(err)?;
            let ccer = ccer_series(&path.dates, &singles).map_err(err)?;
            let mean_single = singles.iter().sum::<f64>() / singles.len() as f64;
            let final_ccer = ccer.last().copied().unwrap_or(0.0);
            w.table(
                &format!("ccer/{}{suffix}.csv", slug(&m.name)),
                &header(&["date", "single_period_cer", "ccer"]),
                (0..path.dates.len()).map(|i| vec![path.dates[i].to_string(), num(singles[i]), num(ccer[i])]),
            )?;
            if no_short {
                row.push(num(cer));
                extra = vec![num(mean_single), num(final_ccer)];
            } else {
                row.extend([num(cer), num(mean_single), num(final_ccer)]);
            }
        }
        // CER, mean, final, CER_no_short -> reorder to the summary layout
        let cer_ns = row.pop().expect("no-short CER");
        row.insert(2, cer_ns);
        row.extend(extra);
        summary.push(row);
    }
    w.table(
        "portfolio_summary.csv",
        &header(&[
            "model",
            "CER",
            "CER_no_short",
            "mean_single_period_CER",
            "final_CCER",
            "mean_single_period_CER_no_short",
            "final_CCER_no_short",
        ]),
        summary,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("agent:rates & spreads"), "agent_rates___spreads");
        assert_eq!(slug("drs_direct"), "drs_direct");
    }
}
