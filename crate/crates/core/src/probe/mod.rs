//! Post-hoc speaker probes on frozen embeddings, and the ablation sweeps built on them.

mod classifier;
mod plot;
mod sweep;

use ndarray::{concatenate, s, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use classifier::{train_probe, EmbeddingSet, ProbeFit, SpeakerProbe, PROBE_CONV_LAYERS};
pub use plot::tradeoff_svg;
pub use sweep::{
    compare_csv, compare_encoder_variants, run_configs, run_sweep, sweep_csv, SeedFailure, SweepBudget, SweepGrid, SweepPoint, CONTENT_LEAK_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::model::{Activation, EncoderVariant, VcModel};
use crate::nn::l1_loss_batch;
use crate::train::{Batch, MelCorpus};

const ENCODE_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub hidden_channels: usize,
    pub kernel_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    /// Segments per speaker drawn from VC-training utterances to fit the probe.
    pub train_per_speaker: usize,
    /// Segments per speaker drawn from held-out utterances to score it.
    pub eval_per_speaker: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden_channels: 32,
            kernel_size: 5,
            learning_rate: 1e-3,
            steps: 400,
            batch_size: 32,
            train_per_speaker: 48,
            eval_per_speaker: 24,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_channels == 0 || self.kernel_size % 2 == 0 || self.batch_size == 0 {
            return Err(Error::Config("probe needs hidden channels, an odd kernel and a batch size".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("probe learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.train_per_speaker == 0 || self.eval_per_speaker == 0 {
            return Err(Error::Config("probe needs segments to train and evaluate on".into()));
        }
        Ok(())
    }
}

/// Disentanglement metrics of one trained model. Accuracies are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub activation: Activation,
    pub bottleneck: usize,
    pub variant: EncoderVariant,
    pub acc_content: f64,
    pub acc_style: f64,
    pub rec_error: f64,
    pub param_count: usize,
    pub n_speakers: usize,
    pub chance: f64,
    /// Content accuracy above the level at which conversion tends to fail.
    pub content_leaks: bool,
    /// Leading hex digits of the weight digest.
    pub fingerprint: String,
}

/// Labelled segments from VC-training utterances (probe fitting) and held-out ones (scoring).
#[derive(Debug, Clone)]
pub struct ProbeData {
    pub train: Batch,
    pub eval: Batch,
}

impl ProbeData {
    pub fn sample(corpus: &MelCorpus, cfg: &ProbeConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self {
            train: corpus.sample_labelled(cfg.train_per_speaker, false, &mut rng)?,
            eval: corpus.sample_labelled(cfg.eval_per_speaker, true, &mut rng)?,
        })
    }
}

/// Content maps `(bottleneck, items, frames)` and flattened style vectors `(dim, items, 1)`.
pub fn embeddings(model: &VcModel, batch: &Batch) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let x = batch.to_tensor();
    let n = x.len_of(Axis(1));
    let mut contents = Vec::new();
    let mut styles = Vec::new();
    for start in (0..n).step_by(ENCODE_CHUNK) {
        let enc = model.encode_batch(&x.slice(s![.., start..(start + ENCODE_CHUNK).min(n), ..]).to_owned())?;
        styles.push(enc.flat_styles().insert_axis(Axis(2)));
        contents.push(enc.content);
    }
    let join = |parts: &[Array3<f64>]| concatenate(Axis(1), &parts.iter().map(|p| p.view()).collect::<Vec<_>>()).expect("chunks agree");
    Ok((
        EmbeddingSet::new(join(&contents), batch.labels.clone())?,
        EmbeddingSet::new(join(&styles), batch.labels.clone())?,
    ))
}

/// Mean L1 reconstruction loss over `batch`.
pub fn batch_reconstruction_error(model: &VcModel, batch: &Batch) -> Result<f64> {
    let x = batch.to_tensor();
    let n = x.len_of(Axis(1));
    let mut total = 0.0;
    for start in (0..n).step_by(ENCODE_CHUNK) {
        let chunk = x.slice(s![.., start..(start + ENCODE_CHUNK).min(n), ..]).to_owned();
        let (loss, _) = l1_loss_batch(&chunk, &model.reconstruct_batch(&chunk)?);
        total += loss * chunk.len() as f64;
    }
    Ok(total / x.len() as f64)
}

fn n_classes(corpus: &MelCorpus) -> Result<usize> {
    match corpus.index.n_train_speakers() {
        n if n < 2 => Err(Error::DegenerateProbe(format!("probing needs at least 2 training speakers, found {n}"))),
        n => Ok(n),
    }
}

/// Fits a speaker probe on content embeddings of VC-training utterances.
pub fn train_content_probe(model: &VcModel, corpus: &MelCorpus, cfg: &ProbeConfig) -> Result<ProbeFit> {
    let n = n_classes(corpus)?;
    let data = ProbeData::sample(corpus, cfg)?;
    let (train, _) = embeddings(model, &data.train)?;
    let (eval, _) = embeddings(model, &data.eval)?;
    train_probe(&train, &eval, n, cfg)
}

/// Fits a speaker probe on flattened style statistics.
pub fn train_style_probe(model: &VcModel, corpus: &MelCorpus, cfg: &ProbeConfig) -> Result<ProbeFit> {
    let n = n_classes(corpus)?;
    let data = ProbeData::sample(corpus, cfg)?;
    let (_, train) = embeddings(model, &data.train)?;
    let (_, eval) = embeddings(model, &data.eval)?;
    train_probe(&train, &eval, n, cfg)
}

/// Mean L1 reconstruction loss on the seeded held-out evaluation segments.
pub fn reconstruction_error(model: &VcModel, corpus: &MelCorpus, cfg: &ProbeConfig) -> Result<f64> {
    batch_reconstruction_error(model, &ProbeData::sample(corpus, cfg)?.eval)
}

/// Both probes and the reconstruction error, sharing one encoding pass.
pub fn evaluate_model(model: &VcModel, corpus: &MelCorpus, cfg: &ProbeConfig) -> Result<ProbeReport> {
    let n = n_classes(corpus)?;
    let data = ProbeData::sample(corpus, cfg)?;
    let (content_train, style_train) = embeddings(model, &data.train)?;
    let (content_eval, style_eval) = embeddings(model, &data.eval)?;
    let acc_content = 100.0 * train_probe(&content_train, &content_eval, n, cfg)?.eval_accuracy;
    let acc_style = 100.0 * train_probe(&style_train, &style_eval, n, cfg)?.eval_accuracy;
    let config = model.config();
    Ok(ProbeReport {
        activation: config.activation,
        bottleneck: config.bottleneck_channels,
        variant: config.variant,
        acc_content,
        acc_style,
        rec_error: batch_reconstruction_error(model, &data.eval)?,
        param_count: model.parameter_count(),
        n_speakers: n,
        chance: 100.0 / n as f64,
        content_leaks: acc_content > CONTENT_LEAK_THRESHOLD,
        fingerprint: model.weights_digest()[..16].to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::train::{synth_corpus, SplitOptions, SynthConfig};

    fn corpus(speakers: usize) -> MelCorpus {
        synth_corpus(&SynthConfig {
            n_speakers: speakers,
            utterances_per_speaker: 4,
            n_mels: 12,
            min_frames: 130,
            max_frames: 160,
            split: SplitOptions { train_fraction: 0.75, heldout_fraction: 0.25, max_utterances: None, seed: 0 },
            ..SynthConfig::default()
        })
        .unwrap()
        .corpus
    }

    fn model() -> VcModel {
        VcModel::new(ModelConfig { n_mels: 12, n_blocks: 2, widths: vec![8, 8], bottleneck_channels: 2, ..ModelConfig::desk() }).unwrap()
    }

    fn cfg() -> ProbeConfig {
        ProbeConfig { hidden_channels: 8, steps: 40, train_per_speaker: 8, eval_per_speaker: 4, ..ProbeConfig::default() }
    }

    #[test]
    fn report_is_reproducible_and_leaves_model_untouched() {
        let (c, m) = (corpus(4), model());
        let before = m.weights_digest();
        let a = evaluate_model(&m, &c, &cfg()).unwrap();
        let b = evaluate_model(&m, &c, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(m.weights_digest(), before);
        assert_eq!(a.n_speakers, 3);
        assert!((a.chance - 100.0 / 3.0).abs() < 1e-12);
        assert!((0.0..=100.0).contains(&a.acc_content) && (0.0..=100.0).contains(&a.acc_style));
        assert_eq!(a.param_count, m.parameter_count());
    }

    #[test]
    fn probe_and_reconstruction_entry_points_agree_with_report() {
        let (c, m) = (corpus(4), model());
        let report = evaluate_model(&m, &c, &cfg()).unwrap();
        assert_eq!(reconstruction_error(&m, &c, &cfg()).unwrap(), report.rec_error);
        assert_eq!(100.0 * train_content_probe(&m, &c, &cfg()).unwrap().eval_accuracy, report.acc_content);
        assert_eq!(100.0 * train_style_probe(&m, &c, &cfg()).unwrap().eval_accuracy, report.acc_style);
    }

    #[test]
    fn single_training_speaker_is_degenerate() {
        let c = corpus(2);
        assert_eq!(c.index.n_train_speakers(), 1);
        assert!(matches!(evaluate_model(&model(), &c, &cfg()), Err(Error::DegenerateProbe(_))));
    }

    #[test]
    fn embedding_shapes() {
        let (c, m) = (corpus(4), model());
        let data = ProbeData::sample(&c, &cfg()).unwrap();
        let (content, style) = embeddings(&m, &data.train).unwrap();
        assert_eq!(content.inputs.dim(), (2, 24, 128));
        assert_eq!(style.inputs.dim(), (32, 24, 1));
    }

    #[test]
    fn eval_segments_come_from_heldout_utterances() {
        let c = corpus(4);
        for spk in &c.index.train_speakers {
            let held = c.index.heldout_utterances(spk);
            let train = c.index.training_utterances(spk);
            assert!(!held.is_empty() && !train.is_empty());
            assert!(held.iter().all(|h| !train.contains(h)));
        }
    }
}
