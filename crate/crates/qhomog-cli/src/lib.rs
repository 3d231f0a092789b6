//! Experiment harness for the quantum homogenisation emulator: TOML
//! configs and presets, execute and count runs, CSV outputs and scaling fits.

pub mod config;
pub mod experiment;
pub mod io;

pub use config::{ExperimentConfig, Mode, PRESETS};
pub use experiment::{fit_report, run_experiment, run_oracle, RunOptions, RunSummary};
