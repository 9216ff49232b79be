use std::path::PathBuf;

use agvc_core::model::{Activation, EncoderVariant};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the default directory for caches and run outputs.
pub const CACHE_DIR_ENV: &str = "AGVC_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "agvc", version, about = "One-shot voice conversion: preprocessing, training, conversion and probing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic multi-speaker WAV corpus.
    Synthcorpus(SynthArgs),
    /// Turn a speaker-directory WAV corpus into a mel cache and corpus index.
    Preprocess(PreprocessArgs),
    /// Train a model on a preprocessed corpus.
    Train(TrainArgs),
    /// Convert a source utterance to the voice of a target utterance.
    Convert(ConvertArgs),
    /// Probe a trained model for speaker information in its embeddings.
    Probe(ProbeArgs),
    /// Train and probe a grid of activations and bottleneck sizes.
    Sweep(SweepArgs),
    /// Compare single- and dual-encoder models with and without activation guidance.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random stage.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Single,
    Dual,
}

impl From<VariantArg> for EncoderVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Single => EncoderVariant::SingleEncoder,
            VariantArg::Dual => EncoderVariant::DualEncoder,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// Bottleneck activation: none, relu, elu, tanh or sigmoid:ALPHA.
    #[arg(long)]
    pub activation: Option<Activation>,
    /// Channels of the content embedding.
    #[arg(long)]
    pub bottleneck: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Use the reduced CPU-scale model widths.
    #[arg(long)]
    pub desk: bool,
    /// Training steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output corpus directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub utterances: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Corpus root with one directory of WAV files per speaker.
    pub corpus: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Mel cache directory; defaults to `$AGVC_CACHE_DIR/mels`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of speakers used for training.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Corpus index written by `preprocess`; defaults to `$AGVC_CACHE_DIR/mels/index.json`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Run directory for checkpoints and the loss curve.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Utterance providing the content.
    #[arg(long)]
    pub source: PathBuf,
    /// Utterance providing the voice.
    #[arg(long)]
    pub target: PathBuf,
    /// Output WAV; the pre-vocoder mel is written next to it as `<name>.mel.npy`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub griffin_lim_iters: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated activations, e.g. `none,sigmoid:0.1`.
    #[arg(long, value_delimiter = ',')]
    pub activations: Vec<Activation>,
    /// Comma-separated bottleneck sizes.
    #[arg(long, value_delimiter = ',')]
    pub bottlenecks: Vec<usize>,
    /// Comma-separated seeds; each grid point is trained once per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Parallel training jobs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}
