//! Experiment configuration files and the built-in presets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qhomog_core::greens::GammaEncoding;
use qhomog_core::poly::FunctionEncoding;
use qhomog_core::rve::EncodingConfig;
use serde::{Deserialize, Serialize};

/// Presets shipped with the binary; the same files live in `presets/`.
pub const PRESETS: &[(&str, &str)] = &[
    ("bench-1d", include_str!("../../../presets/bench-1d.toml")),
    ("bench-2d", include_str!("../../../presets/bench-2d.toml")),
    ("exp-1d", include_str!("../../../presets/exp-1d.toml")),
    ("exp-1d-ensemble", include_str!("../../../presets/exp-1d-ensemble.toml")),
    ("exp-2d", include_str!("../../../presets/exp-2d.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Build the circuits, run them on the emulator and count gates.
    #[default]
    Execute,
    /// Build and count only; no statevector is allocated.
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// One load case per cell, swept over grid sizes.
    #[default]
    Single,
    /// Several load cases solved in one circuit.
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialModel {
    /// Closed-form laminate benchmark with parameters `alpha`, `mu0`, `length`.
    #[default]
    Benchmark,
    /// Modulus table read from `mu_csv`.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    #[serde(default)]
    pub model: MaterialModel,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Reference modulus; for CSV fields the midpoint of the modulus range
    /// is used when absent.
    pub mu0: Option<f64>,
    #[serde(default = "default_length")]
    pub length: f64,
    /// Macroscopic strain, one value per component.
    pub gammabar: Option<Vec<f64>>,
    /// Path of a `k0[,k1],mu` table, relative to the config file.
    pub mu_csv: Option<String>,
}

impl Default for Material {
    fn default() -> Self {
        Self { model: MaterialModel::Benchmark, alpha: default_alpha(), mu0: None, length: default_length(), gammabar: None, mu_csv: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Polynomial,
    Lookup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaScheme {
    /// Low-degree fits on the doubled index domain (two extra qubits).
    #[default]
    Extended,
    /// Higher-degree fits in signed frequencies.
    Plain,
    Lookup,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Encoding {
    #[serde(default)]
    pub scheme: Scheme,
    /// Degree per coordinate of the modulus fits.
    pub mu_degrees: Option<Vec<usize>>,
    /// Coefficient encoding of the 2D operator; follows `scheme` when absent.
    pub gamma: Option<GammaScheme>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    /// Inline load cases.
    pub loads: Option<Vec<Vec<f64>>>,
    /// `case_id,gamma0[,gamma1]` table, relative to the config file.
    pub loads_csv: Option<String>,
    /// Ensemble sizes of the gate-count sweep.
    #[serde(default)]
    pub m_sweep: Vec<usize>,
    /// Grid sizes of the gate-count sweep.
    #[serde(default)]
    pub count_grid: Vec<usize>,
    /// Shots of the sampled readout; 0 reads amplitudes directly.
    #[serde(default)]
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub kind: Kind,
    pub dims: usize,
    pub steps: usize,
    /// Grid sizes per dimension.
    pub grid: Vec<usize>,
    /// Largest grid executed on the emulator; larger ones are counted only.
    pub execute_max_n: Option<usize>,
    /// Iterations written to the strain files; all when absent.
    pub report_steps: Option<Vec<usize>>,
    /// 2D only: keep the strain rows on the line `y = slice_x1`.
    pub slice_x1: Option<f64>,
    #[serde(default = "default_cap")]
    pub qubit_cap: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Oracle steps used as reference when no closed form exists.
    #[serde(default = "default_reference_steps")]
    pub reference_steps: usize,
    #[serde(default)]
    pub material: Material,
    #[serde(default)]
    pub encoding: Encoding,
    pub ensemble: Option<Ensemble>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_alpha() -> f64 {
    0.75
}
fn default_length() -> f64 {
    1.0
}
fn default_cap() -> usize {
    26
}
fn default_reference_steps() -> usize {
    400
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).context("invalid experiment config")?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// A built-in preset; relative paths resolve against the working directory.
    pub fn preset(name: &str) -> Result<Self> {
        let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            bail!("unknown preset '{name}' (available: {})", names.join(", "));
        };
        Self::from_toml(text, Path::new("."))
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dims) {
            bail!("dims must be 1 or 2, got {}", self.dims);
        }
        if self.steps == 0 {
            bail!("steps must be at least 1");
        }
        if self.grid.is_empty() {
            bail!("grid must list at least one size");
        }
        for &n in self.grid.iter().chain(self.ensemble.iter().flat_map(|e| e.count_grid.iter())) {
            if n < 2 || !n.is_power_of_two() {
                bail!("grid size {n} is not a power of two >= 2");
            }
        }
        if let Some(g) = &self.material.gammabar {
            if g.len() != self.dims {
                bail!("gammabar needs {} components", self.dims);
            }
        }
        if self.encoding.mu_degrees.as_ref().is_some_and(|d| d.len() != self.dims) {
            bail!("mu_degrees needs one degree per dimension");
        }
        if let Some(steps) = &self.report_steps {
            if steps.iter().any(|s| *s == 0 || *s > self.steps) {
                bail!("report_steps must lie in 1..={}", self.steps);
            }
        }
        if self.material.model == MaterialModel::Csv {
            if self.material.mu_csv.is_none() {
                bail!("material model 'csv' needs mu_csv");
            }
            if self.grid.len() != 1 {
                bail!("a modulus table fixes the grid; list exactly one size");
            }
        }
        if self.kind == Kind::Ensemble {
            let Some(e) = &self.ensemble else { bail!("ensemble experiments need an [ensemble] section") };
            if e.loads.is_none() == e.loads_csv.is_none() {
                bail!("give exactly one of ensemble.loads and ensemble.loads_csv");
            }
            if e.m_sweep.contains(&0) {
                bail!("m_sweep entries must be positive");
            }
        }
        Ok(())
    }

    pub fn gammabar(&self) -> Vec<f64> {
        self.material.gammabar.clone().unwrap_or_else(|| vec![0.01; self.dims])
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// Whether grid size `n` runs on the emulator in the given mode.
    pub fn executes(&self, n: usize, mode: Mode) -> bool {
        mode == Mode::Execute && self.execute_max_n.map_or(true, |m| n <= m)
    }

    pub fn encoding_config(&self) -> EncodingConfig {
        let base = match self.encoding.scheme {
            Scheme::Polynomial => EncodingConfig::polynomial(self.dims),
            Scheme::Lookup => EncodingConfig::lookup(),
        };
        let mut enc = base;
        if let (Scheme::Polynomial, Some(d)) = (self.encoding.scheme, &self.encoding.mu_degrees) {
            enc.mu = FunctionEncoding::Polynomial { degrees: d.clone() };
            enc.sigma = FunctionEncoding::Polynomial { degrees: d.clone() };
        }
        if let Some(g) = self.encoding.gamma {
            enc.gamma = match g {
                GammaScheme::Extended => GammaEncoding::extended_default(),
                GammaScheme::Plain => GammaEncoding::plain_default(),
                GammaScheme::Lookup => GammaEncoding::Lookup,
            };
        }
        enc
    }
}
