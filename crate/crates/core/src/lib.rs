//! Single-encoder voice conversion with activation-guided content embeddings.
//!
//! The encoder strips time-invariant channel statistics with instance
//! normalization at every block and keeps them as the speaker code; the
//! remaining time-varying map is squashed by a bottleneck activation to form
//! the content code. The decoder re-injects the statistics through adaptive
//! instance normalization over U-net style skips.
//!
//! Layout:
//! - [`audio`]: WAV I/O, resampling, silence trimming, log-mel features, Griffin-Lim.
//! - [`nn`]: the small set of differentiable kernels the model needs, with hand-written backward passes.
//! - [`model`]: encoder/decoder, conversion, checkpoints.
//! - [`train`]: corpora, batching, the Adam training loop, a synthetic speaker corpus.
//! - [`probe`]: post-hoc speaker probes and the ablation sweeps.

pub mod audio;
pub mod error;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod probe;
pub mod train;

pub use audio::{AudioClip, MelConfig, MelSegment, MelSpectrogram, SEGMENT_FRAMES};
pub use error::{Error, Result};
pub use model::{
    Activation, ContentEmbedding, EncoderVariant, LayerStats, ModelConfig, StyleStats, VcModel,
};
pub use probe::{ProbeConfig, ProbeReport, SweepGrid};
pub use train::{CorpusIndex, MelCorpus, TrainConfig};
