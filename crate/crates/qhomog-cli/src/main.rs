use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use qhomog_cli::{fit_report, io, run_experiment, run_oracle, ExperimentConfig, Mode, RunOptions, PRESETS};

#[derive(Parser)]
#[command(name = "qhomog", version, about = "Emulated quantum FFT homogenisation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Built-in preset name.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Path of a TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.preset, &self.config) {
            (Some(p), None) => ExperimentConfig::preset(p),
            (None, Some(c)) => ExperimentConfig::from_file(c),
            _ => bail!("give --preset or --config (presets: {})", PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Overrides the mode of the config.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the scaling laws to a counts CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
    },
    /// Classical fixed-point solve of a config's cells.
    Oracle {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { source, out_dir, mode, seed } => {
            let cfg = source.load()?;
            let opts = RunOptions { mode: mode.unwrap_or(cfg.mode), seed: seed.unwrap_or(cfg.seed), out_dir };
            let summary = run_experiment(&cfg, &opts)?;
            summary.lines.iter().for_each(|l| println!("{l}"));
            println!("wrote {} files to {}", summary.files.len(), opts.out_dir.display());
        }
        Command::Fit { csv } => println!("{}", fit_report(&io::read_counts(&csv)?)),
        Command::Oracle { source, out_dir } => {
            let summary = run_oracle(&source.load()?, &out_dir)?;
            summary.lines.iter().for_each(|l| println!("{l}"));
        }
    }
    Ok(())
}
