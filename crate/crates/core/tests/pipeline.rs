use drs_core::evaluation::read_metrics;
use drs_core::experiment::synthetic::{generate, Preset, SyntheticPanel};
use drs_core::experiment::{run_experiment, slug, ExperimentConfig, ExperimentError, INCOMPLETE_MARKER};
use drs_core::YearMonth;
use std::path::Path;
use std::process::Command;

fn quick_config(data: &SyntheticPanel, panel: &Path, out: &Path, seed: u64) -> ExperimentConfig {
    let mut cfg = data.config(panel, out, seed);
    cfg.synthesis.burn_in = 100;
    cfg.synthesis.n_saved = 200;
    cfg.portfolio.draws = 300;
    cfg
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn small_run_writes_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(Preset::Small, 5);
    let panel = dir.path().join("small.csv");
    data.write(&panel).unwrap();
    let cfg = quick_config(&data, &panel, &dir.path().join("out"), 5);
    let files = run_experiment(&cfg).unwrap();
    let out = &cfg.output_dir;

    assert!(!out.join(INCOMPLETE_MARKER).exists());
    let manifest = lines(&out.join("manifest.txt"));
    assert_eq!(manifest.len(), files.len());
    for f in &manifest {
        assert!(out.join(f).is_file(), "{f} listed but missing");
    }

    let eval_dates: Vec<YearMonth> = data
        .panel
        .dates()
        .iter()
        .copied()
        .filter(|d| *d > data.splits.calibration_end && *d <= data.splits.evaluation_end)
        .collect();
    let metrics = read_metrics(&out.join("metrics.csv")).unwrap();
    assert!(metrics.len() >= cfg.models.len());
    for m in &metrics {
        let rows = lines(&out.join(format!("lpdr/h1_{}.csv", slug(&m.model))));
        assert_eq!(rows.len(), eval_dates.len() + 1, "{}", m.model);
        assert_eq!(rows[1].split(',').next().unwrap(), eval_dates[0].to_string());
    }
    let drs = lines(&out.join("lpdr/h1_drs.csv"));
    assert!(drs[1..].iter().all(|r| r.ends_with(",0")));

    let groups = data.mapping.groups.len();
    let coef = lines(&out.join("coefficients_h1.csv"));
    assert!(coef.len() > 1);
    assert!(coef.iter().all(|r| r.split(',').count() == groups + 2));

    let again = dir.path().join("metrics_copy.csv");
    drs_core::evaluation::write_metrics(&again, &metrics).unwrap();
    assert_eq!(read_metrics(&again).unwrap(), metrics);
    let reference = metrics.iter().find(|m| m.model == "drs").unwrap();
    assert_eq!(reference.lpdr_final, 0.0);
}

#[test]
fn bad_splits_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(Preset::Small, 1);
    let panel = dir.path().join("small.csv");
    data.write(&panel).unwrap();
    let out = dir.path().join("never");
    let mut cfg = quick_config(&data, &panel, &out, 1);
    std::mem::swap(&mut cfg.splits.train_end, &mut cfg.splits.calibration_end);
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, ExperimentError::Config(_)), "{err}");
    assert!(!out.exists());

    let mut cfg = quick_config(&data, &panel, &out, 1);
    cfg.models.retain(|m| m != "drs");
    assert!(matches!(run_experiment(&cfg), Err(ExperimentError::Config(_))));
    assert!(!out.exists());
}

#[test]
fn missing_panel_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(Preset::Small, 1);
    let cfg = quick_config(&data, &dir.path().join("absent.csv"), &dir.path().join("out"), 1);
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    assert!(cfg.output_dir.join(INCOMPLETE_MARKER).exists());
}

#[test]
fn command_line_matches_the_library() {
    let bin = env!("CARGO_BIN_EXE_drs");
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    let status = Command::new(bin)
        .args(["synth-data", "--preset", "small", "--seed", "8", "--out"])
        .arg(&panel)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("panel_groups.txt").is_file());

    let data = generate(Preset::Small, 8);
    let cfg = quick_config(&data, &panel, &dir.path().join("lib"), 8);
    let config_path = dir.path().join("run.toml");
    std::fs::write(&config_path, cfg.to_toml()).unwrap();
    assert_eq!(ExperimentConfig::load(&config_path).unwrap(), cfg);

    let cli_out = dir.path().join("cli");
    let status = Command::new(bin).args(["run", "--config"]).arg(&config_path).arg("--out").arg(&cli_out).status().unwrap();
    assert!(status.success());
    run_experiment(&cfg).unwrap();
    for f in ["metrics.csv", "forecasts.csv", "coefficients_h1.csv"] {
        assert_eq!(std::fs::read(cli_out.join(f)).unwrap(), std::fs::read(cfg.output_dir.join(f)).unwrap(), "{f}");
    }

    let mut bad = cfg.clone();
    bad.horizons = vec![0];
    std::fs::write(&config_path, bad.to_toml()).unwrap();
    let status = Command::new(bin).args(["run", "--config"]).arg(&config_path).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin).args(["run", "--config"]).arg(dir.path().join("nope.toml")).status().unwrap();
    assert!(!status.success());
}
