use std::fs;
use std::path::Path;

use agvc_core::model::{Activation, ModelConfig};
use agvc_core::probe::{ProbeConfig, SweepGrid};
use agvc_core::train::{SplitOptions, SynthConfig, TrainConfig};
use agvc_core::audio::{MelConfig, DEFAULT_GRIFFIN_LIM_ITERS, DEFAULT_TRIM_DB};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Sweep and compare settings that are not part of a single model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub activations: Vec<Activation>,
    pub bottlenecks: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let grid = SweepGrid::default();
        Self { activations: grid.activations, bottlenecks: grid.bottlenecks, seeds: vec![0, 1, 2] }
    }
}

/// Everything a command can be configured with. Every section is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mel: MelConfig,
    /// Silence threshold relative to the peak; `null` disables trimming.
    pub trim_db: Option<f64>,
    pub griffin_lim_iterations: usize,
    pub split: SplitOptions,
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mel: MelConfig::default(),
            trim_db: Some(DEFAULT_TRIM_DB),
            griffin_lim_iterations: DEFAULT_GRIFFIN_LIM_ITERS,
            split: SplitOptions::default(),
            synth: SynthConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            probe: ProbeConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let cfg = serde_json::from_str(&text).map_err(|e| agvc_core::Error::Config(e.to_string())).with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }

    /// Applies `--seed` to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.synth.seed = seed;
        self.model.init_seed = seed;
        self.train.seed = seed;
        self.probe.seed = seed;
    }

    /// Reduced model widths for CPU-scale experiments.
    pub fn use_desk_model(&mut self) {
        let desk = ModelConfig::desk();
        self.model.n_blocks = desk.n_blocks;
        self.model.widths = desk.widths;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"train": {"total_steps": 10}, "model": {"activation": {"kind": "tanh"}}}"#).unwrap();
        assert_eq!(cfg.train.total_steps, 10);
        assert_eq!(cfg.train.learning_rate, 5e-4);
        assert_eq!(cfg.model.activation, Activation::Tanh);
        assert_eq!(cfg.model.widths, vec![256; 4]);
    }

    #[test]
    fn unknown_sections_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"trian": {}}"#).is_err());
    }

    #[test]
    fn seed_reaches_every_stage() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(7);
        assert_eq!((cfg.split.seed, cfg.synth.seed, cfg.model.init_seed, cfg.train.seed, cfg.probe.seed), (7, 7, 7, 7, 7));
    }
}
