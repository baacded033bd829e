use clap::{Parser, Subcommand};
use drs_core::experiment::synthetic::{generate, Preset};
use drs_core::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Decouple-recouple forecasting experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an expanding-window experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated model ids (drs is always required).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Comma-separated forecast horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
    },
    /// Write a synthetic panel and its `<stem>_groups.txt` mapping.
    SynthData {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, seed, out, models, horizons } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(models) = models {
                cfg.models = models;
            }
            if let Some(horizons) = horizons {
                cfg.horizons = horizons;
            }
            let files = run_experiment(&cfg)?;
            log::info!("wrote {} files to {}", files.len(), cfg.output_dir.display());
        }
        Command::SynthData { preset, out, seed } => {
            let data = generate(preset, seed);
            let groups = data.write(&out)?;
            log::info!("wrote {} and {}", out.display(), groups.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
