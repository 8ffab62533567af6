//! Run configuration: a TOML document naming the dimension, budget, mode,
//! core volume and cusp lattice files, with optional tuning sections.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cuspforge_core::assembly::{AssemblyMode, AssemblyOptions};
use cuspforge_core::entropy::{DEFAULT_SAMPLES, DEFAULT_SEED};
use cuspforge_core::lattice::{FlatLattice, SwapForm};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Close,
    Double,
    /// Cutoff construction and its pinching certificate only.
    CutoffOnly,
    /// The hyperbolic core on its own: entropy chain without cusps.
    EntropyOnly,
}

impl RunMode {
    pub fn assembly_mode(self) -> Option<AssemblyMode> {
        match self {
            RunMode::Close => Some(AssemblyMode::Close),
            RunMode::Double => Some(AssemblyMode::Double),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsSection {
    pub allow_dim3: bool,
    pub paper_generator_swap: bool,
    pub cut_budget: Option<f64>,
    pub volume_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub pinching_grid_step: f64,
    pub quadrature_step: f64,
    pub gluing: f64,
    pub r_ceiling: f64,
    /// Spacing of the rows in the cutoff CSV grid.
    pub csv_step: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let o = AssemblyOptions::default();
        Self {
            pinching_grid_step: o.pinching_grid_step,
            quadrature_step: o.quadrature_step,
            gluing: o.gluing_tol,
            r_ceiling: o.r_ceiling,
            csv_step: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub eps: f64,
    pub mode: RunMode,
    #[serde(default)]
    pub core_volume: Option<f64>,
    /// Lattice files, relative to the config file.
    #[serde(default)]
    pub lattices: Vec<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub options: OptionsSection,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            bail!("dimension must be >= 3, got {}", self.dimension);
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            bail!("eps must lie in (0, 1], got {}", self.eps);
        }
        if matches!(self.mode, RunMode::Close | RunMode::Double | RunMode::EntropyOnly) {
            match self.core_volume {
                Some(v) if v > 0.0 && v.is_finite() => {}
                Some(v) => bail!("core_volume must be > 0, got {v}"),
                None => bail!("mode {:?} needs core_volume", self.mode),
            }
        }
        Ok(())
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            allow_dim3: self.options.allow_dim3,
            swap_form: if self.options.paper_generator_swap { SwapForm::Literal } else { SwapForm::Unimodular },
            cut_budget: self.options.cut_budget,
            volume_bound: self.options.volume_bound,
            pinching_grid_step: self.tolerances.pinching_grid_step,
            quadrature_step: self.tolerances.quadrature_step,
            gluing_tol: self.tolerances.gluing,
            r_ceiling: self.tolerances.r_ceiling,
        }
    }
}

/// A parsed config with its lattices read from disk.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: RunConfig,
    pub lattices: Vec<FlatLattice>,
}

impl LoadedConfig {
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }

    pub fn lattice_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir().join(p)
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).context("invalid config")?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    let mut loaded = LoadedConfig { path: path.to_path_buf(), config, lattices: Vec::new() };
    let uses_lattices = matches!(loaded.config.mode, RunMode::Close | RunMode::Double);
    for p in &loaded.config.lattices {
        let full = loaded.lattice_path(p);
        if !full.is_file() {
            bail!("lattice file {} does not exist", full.display());
        }
        if uses_lattices {
            let l = FlatLattice::from_file(&full).with_context(|| format!("lattice file {}", full.display()))?;
            loaded.lattices.push(l);
        }
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("dimension = 4\neps = 0.1\nmode = \"close\"\ncore_volume = 10.0\n").unwrap();
        assert_eq!(c.monte_carlo.samples, 100_000);
        assert_eq!(c.monte_carlo.seed, 42);
        assert_eq!(c.tolerances.gluing, 1e-9);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let c = parse_config("dimension = 2\neps = 0.1\nmode = \"close\"\ncore_volume = 1.0\n").unwrap();
        assert!(c.validate().is_err());
        let c = parse_config("dimension = 4\neps = 2.0\nmode = \"cutoff-only\"\n").unwrap();
        assert!(c.validate().is_err());
        let c = parse_config("dimension = 4\neps = 0.1\nmode = \"double\"\n").unwrap();
        assert!(c.validate().is_err());
        assert!(parse_config("dimension = 4\neps = 0.1\nmode = \"close\"\nbogus = 1\n").is_err());
        assert!(parse_config("dimension = 4\neps = 0.1\nmode = \"sideways\"\n").is_err());
    }
}
