use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{next_batch, MelCorpus};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, VcModel};
use crate::nn::{clip_global_norm, Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    /// Seeds batch sampling; model initialisation has its own seed.
    pub seed: u64,
    /// Save a checkpoint every this many steps; 0 disables intermediate checkpoints.
    pub checkpoint_every: usize,
    /// Optional global gradient-norm clip.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            total_steps: 2000,
            seed: 0,
            checkpoint_every: 0,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if self.adam_epsilon <= 0.0 || self.batch_size == 0 {
            return bad("adam epsilon and batch size must be positive".into());
        }
        if self.grad_clip.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("gradient clip must be positive".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.adam_epsilon }
    }
}

/// One optimizer update on `batch`; returns the loss before the update.
pub fn train_step(model: &mut VcModel, batch: &Array3<f64>, opt: &mut Adam, step: usize, grad_clip: Option<f64>) -> Result<f64> {
    let (loss, mut grads) = model.loss_and_gradients(batch)?;
    if !loss.is_finite() {
        return Err(Error::Divergence { step, loss });
    }
    if let Some(max) = grad_clip {
        clip_global_norm(&mut grads, max);
    }
    opt.step_layers(model.layers_mut(), &grads);
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VcModel,
    pub losses: Vec<f64>,
    /// Path of the final checkpoint, when an output directory was given.
    pub checkpoint: Option<PathBuf>,
}

/// Trains a fresh model on `corpus`.
///
/// With `out_dir`, writes `loss.csv`, periodic `step_XXXXXX.ckpt` files and `final.ckpt`.
pub fn run_training(corpus: &MelCorpus, model_cfg: &ModelConfig, cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.n_mels() != model_cfg.n_mels {
        return Err(Error::Config(format!(
            "corpus has {} mel bands but the model expects {}",
            corpus.n_mels(),
            model_cfg.n_mels
        )));
    }
    let mut model = VcModel::new(model_cfg.clone())?;
    let mut opt = Adam::new(cfg.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut losses = Vec::with_capacity(cfg.total_steps);
    for step in 0..cfg.total_steps {
        let batch = next_batch(corpus, cfg.batch_size, &mut rng)?.to_tensor();
        let loss = train_step(&mut model, &batch, &mut opt, step, cfg.grad_clip);
        if let (Err(_), Some(dir)) = (&loss, out_dir) {
            write_loss_csv(&dir.join("loss.csv"), &losses)?;
        }
        losses.push(loss?);
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.total_steps {
                model.save(&dir.join(format!("step_{:06}.ckpt", step + 1)))?;
            }
        }
    }
    let checkpoint = match out_dir {
        Some(dir) => {
            write_loss_csv(&dir.join("loss.csv"), &losses)?;
            let path = dir.join("final.ckpt");
            model.save(&path)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome { model, losses, checkpoint })
}

pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut out = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad loss line: {l}")))
        })
        .collect()
}

/// Mean of the first and of the last `window` losses.
pub fn smoothed_loss(losses: &[f64], window: usize) -> Option<(f64, f64)> {
    if window == 0 || losses.len() < window {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&losses[..window]), mean(&losses[losses.len() - window..])))
}
