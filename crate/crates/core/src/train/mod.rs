//! Self-reconstruction training: corpora, batching and the optimizer loop.

mod corpus;
mod synth;
mod trainer;

pub use corpus::{build_corpus_index, next_batch, Batch, CorpusIndex, MelCorpus, SplitOptions};
pub use synth::{synth_corpus, SpeakerSignature, SynthConfig, SynthCorpus};
pub use trainer::{
    read_loss_csv, run_training, smoothed_loss, train_step, write_loss_csv, TrainConfig, TrainOutcome,
};
