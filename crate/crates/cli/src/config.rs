//! Flat TOML configuration. Every key mirrors a command-line flag with
//! dashes replaced by underscores; a flag given on the command line wins
//! over the same key in the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use specmine_core::tuner::CostConfig;
use specmine_core::Parallelism;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<String>,
    pub script: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub histories: Option<PathBuf>,
    pub seed_tx: Option<String>,
    pub ordering_cap: Option<usize>,
    pub preset: Option<String>,
    pub bound: Option<usize>,
    pub rng_seed: Option<u64>,
    pub w_size: Option<f64>,
    pub w_precision: Option<f64>,
    pub w_generality: Option<f64>,
    pub k_eval: Option<usize>,
    pub t0: Option<f64>,
    pub cooling: Option<f64>,
    pub emit_depgraph: Option<PathBuf>,
    pub dump_recipe: Option<PathBuf>,
    pub load_recipe: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub sequential: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parallelism(&self, sequential_flag: bool) -> Parallelism {
        if sequential_flag || self.sequential.unwrap_or(false) {
            Parallelism::Sequential
        } else {
            Parallelism::default()
        }
    }
}

/// Flag value first, then the config file.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

/// Annealing settings from command-line overrides on top of the config
/// file on top of the preset.
#[derive(Debug, Default, Clone)]
pub struct TuneOverrides {
    pub preset: Option<String>,
    pub bound: Option<usize>,
    pub rng_seed: Option<u64>,
}

pub fn cost_config(
    flags: &TuneOverrides,
    file: &ConfigFile,
    parallelism: Parallelism,
) -> Result<CostConfig> {
    let preset = pick(&flags.preset, &file.preset).unwrap_or_else(|| "default".into());
    let mut cfg = CostConfig::preset(&preset)?;
    if let Some(w) = file.w_size {
        cfg.w_size = w;
    }
    if let Some(w) = file.w_precision {
        cfg.w_precision = w;
    }
    if let Some(w) = file.w_generality {
        cfg.w_generality = w;
    }
    if let Some(k) = file.k_eval {
        cfg.k_eval = k;
    }
    if let Some(t) = file.t0 {
        cfg.t0 = t;
    }
    if let Some(c) = file.cooling {
        cfg.cooling = c;
    }
    if let Some(b) = pick(&flags.bound, &file.bound) {
        cfg.bound = b;
    }
    if let Some(s) = pick(&flags.rng_seed, &file.rng_seed) {
        cfg.rng_seed = s;
    }
    cfg.parallelism = parallelism;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file_and_file_over_preset() {
        let file: ConfigFile =
            toml::from_str("preset = \"general\"\nbound = 7\nw_size = 3.0").unwrap();
        let flags = TuneOverrides {
            bound: Some(9),
            ..TuneOverrides::default()
        };
        let cfg = cost_config(&flags, &file, Parallelism::Sequential).unwrap();
        assert_eq!(cfg.bound, 9);
        assert_eq!(cfg.w_size, 3.0);
        assert_eq!(cfg.w_generality, CostConfig::general().w_generality);
        assert_eq!(cfg.rng_seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("bogus = 1").is_err());
    }

    #[test]
    fn invalid_weights_are_rejected() {
        let file: ConfigFile = toml::from_str("cooling = 1.5").unwrap();
        assert!(cost_config(&TuneOverrides::default(), &file, Parallelism::Sequential).is_err());
    }
}
