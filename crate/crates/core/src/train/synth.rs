use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::corpus::{CorpusIndex, MelCorpus, SplitOptions};
use crate::audio::{MelSpectrogram, LOG_FLOOR};
use crate::error::{Error, Result};

/// Parameters of a generated multi-speaker log-mel corpus.
///
/// All speakers share one inventory of phone templates; each speaker applies a
/// fixed per-channel affine map `mu + sigma * content` to the shared content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub n_mels: usize,
    pub n_phones: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub split: SplitOptions,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 5,
            utterances_per_speaker: 12,
            min_frames: 160,
            max_frames: 320,
            n_mels: 80,
            n_phones: 12,
            noise_std: 0.1,
            seed: 0,
            split: SplitOptions { train_fraction: 0.8, heldout_fraction: 0.25, max_utterances: None, seed: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSignature {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: MelCorpus,
    pub signatures: BTreeMap<String, SpeakerSignature>,
}

fn smooth_curve<R: Rng>(n: usize, rng: &mut R, components: usize, amplitude: f64) -> Array1<f64> {
    let mut curve = Array1::zeros(n);
    for c in 1..=components {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let amp = amplitude * rng.random_range(-1.0..1.0) / c as f64;
        for (k, v) in curve.iter_mut().enumerate() {
            *v += amp * (std::f64::consts::PI * c as f64 * k as f64 / n as f64 + phase).sin();
        }
    }
    curve
}

fn phone_templates<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Vec<Array1<f64>> {
    (0..cfg.n_phones)
        .map(|_| {
            let mut t = Array1::from_elem(cfg.n_mels, -1.5);
            for _ in 0..3 {
                let centre = rng.random_range(0.0..cfg.n_mels as f64);
                let width = rng.random_range(1.5..6.0);
                let height = rng.random_range(1.0..3.0);
                for (k, v) in t.iter_mut().enumerate() {
                    let d = (k as f64 - centre) / width;
                    *v += height * (-0.5 * d * d).exp();
                }
            }
            t
        })
        .collect()
}

fn signature<R: Rng>(n_mels: usize, rng: &mut R) -> SpeakerSignature {
    let base = rng.random_range(-6.0..-3.0);
    let tilt = rng.random_range(-2.0..2.0);
    let ripple = smooth_curve(n_mels, rng, 4, 1.5);
    let mu = (0..n_mels).map(|k| base + tilt * k as f64 / n_mels as f64 + ripple[k]).collect();
    let gain = smooth_curve(n_mels, rng, 3, 0.5);
    let scale = rng.random_range(0.7..1.4);
    let sigma = (0..n_mels).map(|k| (scale * gain[k].exp()).clamp(0.3, 3.0)).collect();
    SpeakerSignature { mu, sigma }
}

fn utterance<R: Rng>(
    cfg: &SynthConfig,
    templates: &[Array1<f64>],
    sig: &SpeakerSignature,
    noise: &Normal<f64>,
    rng: &mut R,
) -> Array2<f64> {
    let frames = rng.random_range(cfg.min_frames..=cfg.max_frames);
    let mut content = Array2::zeros((cfg.n_mels, frames));
    let mut prev = rng.random_range(0..templates.len());
    let mut t = 0;
    while t < frames {
        let next = rng.random_range(0..templates.len());
        let dur = rng.random_range(6..18);
        let fade = 3.min(dur);
        for j in 0..dur.min(frames - t) {
            let w = if j < fade { (j + 1) as f64 / (fade + 1) as f64 } else { 1.0 };
            let mut col = content.column_mut(t + j);
            for k in 0..cfg.n_mels {
                col[k] = w * templates[next][k] + (1.0 - w) * templates[prev][k];
            }
        }
        t += dur;
        prev = next;
    }
    let floor = LOG_FLOOR.ln();
    Array2::from_shape_fn((cfg.n_mels, frames), |(k, t)| {
        (sig.mu[k] + sig.sigma[k] * content[[k, t]] + noise.sample(rng)).max(floor)
    })
}

/// Generates a seeded speaker-labelled corpus of log-mel spectrograms.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.n_phones == 0 || cfg.n_mels == 0 || cfg.min_frames == 0 || cfg.min_frames > cfg.max_frames {
        return Err(Error::Config("synthetic corpus needs phones, mel bands and a valid frame range".into()));
    }
    if cfg.noise_std.is_nan() || cfg.noise_std < 0.0 {
        return Err(Error::Config(format!("noise std must be non-negative, got {}", cfg.noise_std)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates = phone_templates(cfg, &mut rng);
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");

    let mut listing = BTreeMap::new();
    let mut mels = BTreeMap::new();
    let mut signatures = BTreeMap::new();
    for s in 0..cfg.n_speakers {
        let speaker = format!("spk{s:02}");
        let sig = signature(cfg.n_mels, &mut rng);
        let mut utts = Vec::new();
        for u in 0..cfg.utterances_per_speaker {
            let id = format!("{speaker}/utt{u:03}.npy");
            mels.insert(id.clone(), MelSpectrogram::new(utterance(cfg, &templates, &sig, &noise, &mut rng))?);
            utts.push(id);
        }
        listing.insert(speaker.clone(), utts);
        signatures.insert(speaker, sig);
    }
    let index = CorpusIndex::from_listing(listing, cfg.split)?;
    Ok(SynthCorpus { corpus: MelCorpus::new(index, mels)?, signatures })
}
