use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{concatenate, Array3, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::store::read_mel;
use crate::audio::{sample_segment, MelSegment, MelSpectrogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitOptions {
    /// Fraction of speakers used for training; the rest are unseen evaluation speakers.
    pub train_fraction: f64,
    /// Fraction of each training speaker's utterances withheld from model training.
    pub heldout_fraction: f64,
    /// Per-speaker cap on utterances, drawn at random when exceeded.
    pub max_utterances: Option<usize>,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { train_fraction: 0.8, heldout_fraction: 0.2, max_utterances: Some(200), seed: 0 }
    }
}

/// Speaker-labelled utterance listing with a seeded train/eval speaker split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub speakers: Vec<String>,
    /// Utterance references per speaker, relative to the corpus root.
    pub utterances: BTreeMap<String, Vec<String>>,
    pub train_speakers: Vec<String>,
    pub eval_speakers: Vec<String>,
    /// Utterances of training speakers reserved for probes and reconstruction scoring.
    pub heldout: BTreeMap<String, Vec<String>>,
    pub options: SplitOptions,
}

impl CorpusIndex {
    pub fn from_listing(mut listing: BTreeMap<String, Vec<String>>, options: SplitOptions) -> Result<Self> {
        listing.retain(|_, utts| !utts.is_empty());
        if listing.len() < 2 {
            return Err(Error::Corpus(format!("need at least 2 speakers, found {}", listing.len())));
        }
        if !(options.train_fraction > 0.0 && options.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction must be in (0, 1), got {}", options.train_fraction)));
        }
        if !(0.0..1.0).contains(&options.heldout_fraction) {
            return Err(Error::Config(format!("heldout fraction must be in [0, 1), got {}", options.heldout_fraction)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

        let mut utterances = BTreeMap::new();
        for (speaker, mut utts) in listing {
            utts.sort();
            if let Some(cap) = options.max_utterances.filter(|&c| utts.len() > c) {
                utts.shuffle(&mut rng);
                utts.truncate(cap);
                utts.sort();
            }
            utterances.insert(speaker, utts);
        }
        let speakers: Vec<String> = utterances.keys().cloned().collect();

        let n = speakers.len();
        let n_train = ((n as f64 * options.train_fraction).round() as usize).clamp(1, n - 1);
        let mut order = speakers.clone();
        order.shuffle(&mut rng);
        let mut train_speakers = order[..n_train].to_vec();
        let mut eval_speakers = order[n_train..].to_vec();
        train_speakers.sort();
        eval_speakers.sort();

        let mut heldout = BTreeMap::new();
        for speaker in &train_speakers {
            let mut utts = utterances[speaker].clone();
            let n_held = if utts.len() < 2 {
                0
            } else {
                ((utts.len() as f64 * options.heldout_fraction).round() as usize).clamp(usize::from(options.heldout_fraction > 0.0), utts.len() - 1)
            };
            utts.shuffle(&mut rng);
            let mut held = utts[..n_held].to_vec();
            held.sort();
            heldout.insert(speaker.clone(), held);
        }
        Ok(Self { speakers, utterances, train_speakers, eval_speakers, heldout, options })
    }

    pub fn n_train_speakers(&self) -> usize {
        self.train_speakers.len()
    }

    /// Utterances of `speaker` available for model training.
    pub fn training_utterances(&self, speaker: &str) -> Vec<&str> {
        let held = self.heldout.get(speaker);
        self.utterances
            .get(speaker)
            .map(|u| {
                u.iter()
                    .filter(|x| !held.is_some_and(|h| h.contains(x)))
                    .map(String::as_str)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn heldout_utterances(&self, speaker: &str) -> Vec<&str> {
        self.heldout.get(speaker).map(|u| u.iter().map(String::as_str).collect()).unwrap_or_default()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Scans `<root>/<speaker>/<utterance>.npy` and splits speakers with `train_fraction`.
pub fn build_corpus_index(root: &Path, train_fraction: f64, seed: u64) -> Result<CorpusIndex> {
    build_corpus_index_with(root, SplitOptions { train_fraction, seed, ..SplitOptions::default() })
}

pub fn build_corpus_index_with(root: &Path, options: SplitOptions) -> Result<CorpusIndex> {
    let entries = fs::read_dir(root).map_err(|e| Error::Corpus(format!("{}: {e}", root.display())))?;
    let mut listing = BTreeMap::new();
    for entry in entries {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let speaker = entry.file_name().to_string_lossy().into_owned();
        let mut utts = Vec::new();
        for file in fs::read_dir(entry.path())? {
            let path = file?.path();
            if path.extension().is_some_and(|e| e == "npy") {
                let name = path.file_name().expect("file").to_string_lossy();
                utts.push(format!("{speaker}/{name}"));
            }
        }
        listing.insert(speaker, utts);
    }
    CorpusIndex::from_listing(listing, options)
}

/// An index together with the spectrograms it references.
#[derive(Debug, Clone)]
pub struct MelCorpus {
    pub index: CorpusIndex,
    pub mels: BTreeMap<String, MelSpectrogram>,
}

impl MelCorpus {
    pub fn new(index: CorpusIndex, mels: BTreeMap<String, MelSpectrogram>) -> Result<Self> {
        for utts in index.utterances.values() {
            if let Some(missing) = utts.iter().find(|u| !mels.contains_key(*u)) {
                return Err(Error::Corpus(format!("no spectrogram for utterance {missing}")));
            }
        }
        Ok(Self { index, mels })
    }

    /// Loads every referenced `.npy` relative to `root`.
    pub fn load(index: CorpusIndex, root: &Path) -> Result<Self> {
        let mut mels = BTreeMap::new();
        for utt in index.utterances.values().flatten() {
            mels.insert(utt.clone(), read_mel(&root.join(utt))?);
        }
        Self::new(index, mels)
    }

    pub fn n_mels(&self) -> usize {
        self.mels.values().next().map_or(0, MelSpectrogram::n_mels)
    }

    /// Draws `per_speaker` random segments per training speaker from the chosen utterance pool.
    pub fn sample_labelled<R: Rng + ?Sized>(&self, per_speaker: usize, heldout: bool, rng: &mut R) -> Result<Batch> {
        let mut segments = Vec::new();
        let mut labels = Vec::new();
        for (label, speaker) in self.index.train_speakers.iter().enumerate() {
            let pool = if heldout { self.index.heldout_utterances(speaker) } else { self.index.training_utterances(speaker) };
            if pool.is_empty() {
                return Err(Error::Corpus(format!(
                    "speaker {speaker} has no {} utterances",
                    if heldout { "held-out" } else { "training" }
                )));
            }
            for _ in 0..per_speaker {
                let utt = pool[rng.random_range(0..pool.len())];
                segments.push(sample_segment(&self.mels[utt], rng));
                labels.push(label);
            }
        }
        Ok(Batch { segments, labels })
    }
}

/// Segments with the training-speaker label of each.
#[derive(Debug, Clone)]
pub struct Batch {
    pub segments: Vec<MelSegment>,
    pub labels: Vec<usize>,
}

impl Batch {
    /// `(n_mels, batch, frames)` tensor for the model.
    pub fn to_tensor(&self) -> Array3<f64> {
        let views: Vec<_> = self.segments.iter().map(|s| s.values.view().insert_axis(Axis(1))).collect();
        concatenate(Axis(1), &views).expect("segments share a shape")
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Uniform speaker, then uniform utterance, then a random crop.
pub fn next_batch<R: Rng + ?Sized>(corpus: &MelCorpus, batch_size: usize, rng: &mut R) -> Result<Batch> {
    let speakers = &corpus.index.train_speakers;
    if speakers.is_empty() || batch_size == 0 {
        return Err(Error::Corpus("no training speakers or empty batch".into()));
    }
    let mut segments = Vec::with_capacity(batch_size);
    let mut labels = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let label = rng.random_range(0..speakers.len());
        let pool = corpus.index.training_utterances(&speakers[label]);
        if pool.is_empty() {
            return Err(Error::Corpus(format!("speaker {} has no training utterances", speakers[label])));
        }
        let utt = pool[rng.random_range(0..pool.len())];
        segments.push(sample_segment(&corpus.mels[utt], rng));
        labels.push(label);
    }
    Ok(Batch { segments, labels })
}
