//! The conversion network: a single encoder whose instance-norm statistics form the
//! speaker code, an activation-guided content bottleneck, and a decoder that
//! re-applies the statistics through AdaIN skips.

mod checkpoint;
mod config;
mod network;

use ndarray::{concatenate, s, Array1, Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{EncoderVariant, ModelConfig};
pub use crate::nn::{apply_activation, Activation};

use network::{Decoder, Encoder};

use crate::audio::{MelSegment, MelSpectrogram, SEGMENT_FRAMES};
use crate::error::{ensure_finite, Error, Result};
use crate::nn::{l1_loss_batch, Conv1d, ConvGrad, Stats};

/// Channel-wise statistics removed by one encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub mu: Array1<f64>,
    pub sigma: Array1<f64>,
}

/// The speaker code: statistics of every encoder IN layer, first block first.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleStats {
    pub layers: Vec<LayerStats>,
}

impl StyleStats {
    fn from_batch(stats: &[Stats], item: usize) -> Self {
        Self {
            layers: stats
                .iter()
                .map(|s| LayerStats { mu: s.mu.column(item).to_owned(), sigma: s.sigma.column(item).to_owned() })
                .collect(),
        }
    }

    /// Tiles the statistics across `batch` items.
    fn to_batch(&self, batch: usize) -> Vec<Stats> {
        let tile = |v: &Array1<f64>| {
            v.view().insert_axis(Axis(1)).broadcast((v.len(), batch)).expect("broadcast").to_owned()
        };
        self.layers.iter().map(|l| Stats { mu: tile(&l.mu), sigma: tile(&l.sigma) }).collect()
    }

    /// All means and deviations concatenated layer by layer (`mu_0, sigma_0, mu_1, ...`).
    pub fn flatten(&self) -> Array1<f64> {
        let parts: Vec<_> = self.layers.iter().flat_map(|l| [l.mu.view(), l.sigma.view()]).collect();
        concatenate(Axis(0), &parts).expect("1-D parts")
    }

    pub fn dim(&self) -> usize {
        self.layers.iter().map(|l| 2 * l.mu.len()).sum()
    }
}

/// Bottleneck map after activation guidance, `bottleneck_channels x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentEmbedding {
    pub values: Array2<f64>,
    pub activation: Activation,
}

/// Output of a batched encoder pass.
#[derive(Debug, Clone)]
pub struct EncodedBatch {
    /// `(bottleneck, batch, frames)`
    pub content: Array3<f64>,
    pub stats: Vec<Stats>,
}

impl EncodedBatch {
    pub fn style(&self, item: usize) -> StyleStats {
        StyleStats::from_batch(&self.stats, item)
    }

    /// Style vectors as `(style_dim, batch)`.
    pub fn flat_styles(&self) -> Array2<f64> {
        let batch = self.content.len_of(Axis(1));
        let cols: Vec<Array1<f64>> = (0..batch).map(|b| self.style(b).flatten()).collect();
        let views: Vec<_> = cols.iter().map(|c| c.view().insert_axis(Axis(1))).collect();
        concatenate(Axis(1), &views).expect("equal lengths")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcModel {
    config: ModelConfig,
    encoder: Encoder,
    style_encoder: Option<Encoder>,
    decoder: Decoder,
}

impl VcModel {
    /// Builds a model with weights drawn from `config.init_seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let k = config.kernel_size;
        let encoder = Encoder::new(config.n_mels, &config.widths, Some(config.bottleneck_channels), k, &mut rng);
        let style_encoder = match config.variant {
            EncoderVariant::SingleEncoder => None,
            EncoderVariant::DualEncoder => Some(Encoder::new(config.n_mels, &config.widths, None, k, &mut rng)),
        };
        let decoder = Decoder::new(config.n_mels, &config.widths, config.bottleneck_channels, k, &mut rng);
        Ok(Self { config, encoder, style_encoder, decoder })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Named layers in a fixed order: encoder, style encoder (dual variant only), decoder.
    pub fn named_layers(&self) -> Vec<(String, &Conv1d)> {
        let mut named = Vec::new();
        let n = self.encoder.blocks.len();
        for (i, l) in self.encoder.layers().enumerate() {
            named.push((if i < n { format!("encoder.block{i}") } else { "encoder.out".into() }, l));
        }
        if let Some(style) = &self.style_encoder {
            for (i, l) in style.layers().enumerate() {
                named.push((format!("style_encoder.block{i}"), l));
            }
        }
        for (i, l) in self.decoder.layers().enumerate() {
            named.push((if i < n { format!("decoder.block{i}") } else { "decoder.out".into() }, l));
        }
        named
    }

    pub fn layers(&self) -> Vec<&Conv1d> {
        self.named_layers().into_iter().map(|(_, l)| l).collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Conv1d> {
        let mut out: Vec<&mut Conv1d> = self.encoder.layers_mut().collect();
        if let Some(style) = &mut self.style_encoder {
            out.extend(style.layers_mut());
        }
        out.extend(self.decoder.layers_mut());
        out
    }

    /// Trainable scalars.
    pub fn parameter_count(&self) -> usize {
        crate::nn::count_parameters(self.layers())
    }

    /// Parameters of the layers producing the content code and the style code respectively.
    pub fn path_layer_names(&self) -> (Vec<String>, Vec<String>) {
        let names: Vec<String> = self.named_layers().into_iter().map(|(n, _)| n).collect();
        let content = names.iter().filter(|n| n.starts_with("encoder.")).cloned().collect();
        let style_prefix = if self.style_encoder.is_some() { "style_encoder." } else { "encoder.block" };
        let style = names.iter().filter(|n| n.starts_with(style_prefix)).cloned().collect();
        (content, style)
    }

    fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        let (k, b, t) = x.dim();
        if k != self.config.n_mels {
            return Err(Error::Shape(format!("model expects {} mel bands, got {k}", self.config.n_mels)));
        }
        if b == 0 || t == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        ensure_finite(x.iter(), "model input")
    }

    /// Content and style for a `(n_mels, batch, frames)` input.
    pub fn encode_batch(&self, x: &Array3<f64>) -> Result<EncodedBatch> {
        self.check_input(x)?;
        let eps = self.config.epsilon;
        let trace = self.encoder.forward(x, eps, self.config.activation);
        let stats = match &self.style_encoder {
            Some(style) => style.forward(x, eps, Activation::None).stats,
            None => trace.stats,
        };
        Ok(EncodedBatch { content: trace.content.expect("encoder has a bottleneck"), stats })
    }

    pub fn decode_batch(&self, content: &Array3<f64>, stats: &[Stats]) -> Result<Array3<f64>> {
        self.check_decode(content, stats)?;
        Ok(self.decoder.forward(content, stats, self.config.epsilon).output)
    }

    fn check_decode(&self, content: &Array3<f64>, stats: &[Stats]) -> Result<()> {
        let (c, b, _) = content.dim();
        if c != self.config.bottleneck_channels {
            return Err(Error::Shape(format!(
                "content has {c} channels, model bottleneck is {}",
                self.config.bottleneck_channels
            )));
        }
        if stats.len() != self.config.n_blocks {
            return Err(Error::Shape(format!("{} style layers for {} blocks", stats.len(), self.config.n_blocks)));
        }
        for (l, (st, &w)) in stats.iter().zip(&self.config.widths).enumerate() {
            if st.mu.dim() != (w, b) || st.sigma.dim() != (w, b) {
                return Err(Error::Shape(format!("style layer {l} has shape {:?}, expected ({w}, {b})", st.mu.dim())));
            }
        }
        Ok(())
    }

    pub fn reconstruct_batch(&self, x: &Array3<f64>) -> Result<Array3<f64>> {
        let enc = self.encode_batch(x)?;
        self.decode_batch(&enc.content, &enc.stats)
    }

    /// Encodes a spectrogram of any length.
    pub fn encode_frames(&self, x: &Array2<f64>) -> Result<(ContentEmbedding, StyleStats)> {
        let enc = self.encode_batch(&x.view().insert_axis(Axis(1)).to_owned())?;
        let content = ContentEmbedding {
            values: enc.content.index_axis(Axis(1), 0).to_owned(),
            activation: self.config.activation,
        };
        Ok((content, enc.style(0)))
    }

    pub fn encode(&self, x: &MelSegment) -> Result<(ContentEmbedding, StyleStats)> {
        if x.values.ncols() != SEGMENT_FRAMES {
            return Err(Error::Shape(format!("segment has {} frames", x.values.ncols())));
        }
        self.encode_frames(&x.values)
    }

    fn content_batch(&self, c: &ContentEmbedding) -> Array3<f64> {
        c.values.view().insert_axis(Axis(1)).to_owned()
    }

    pub fn decode(&self, c: &ContentEmbedding, s: &StyleStats) -> Result<MelSegment> {
        if c.values.ncols() != SEGMENT_FRAMES {
            return Err(Error::Shape(format!("content has {} frames", c.values.ncols())));
        }
        let out = self.decode_batch(&self.content_batch(c), &s.to_batch(1))?;
        MelSegment::from_values(out.index_axis_move(Axis(1), 0))
    }

    /// Decoder AdaIN outputs (before the nonlinearity), in decoder order.
    pub fn decoder_adain_outputs(&self, c: &ContentEmbedding, s: &StyleStats) -> Result<Vec<Array2<f64>>> {
        let content = self.content_batch(c);
        let stats = s.to_batch(1);
        self.check_decode(&content, &stats)?;
        let trace = self.decoder.forward(&content, &stats, self.config.epsilon);
        Ok(trace.adain_out.into_iter().map(|a| a.index_axis_move(Axis(1), 0)).collect())
    }

    pub fn reconstruct(&self, x: &MelSegment) -> Result<MelSegment> {
        let (c, s) = self.encode(x)?;
        self.decode(&c, &s)
    }

    /// Style of a whole utterance. Utterances shorter than a segment are cyclically extended.
    pub fn style_of(&self, mel: &Array2<f64>) -> Result<StyleStats> {
        let frames = mel.ncols();
        if frames == 0 {
            return Err(Error::EmptyInput("target spectrogram has no frames".into()));
        }
        let padded = if frames < SEGMENT_FRAMES {
            let idx: Vec<usize> = (0..SEGMENT_FRAMES).map(|j| j % frames).collect();
            mel.select(Axis(1), &idx)
        } else {
            mel.clone()
        };
        Ok(self.encode_frames(&padded)?.1)
    }

    /// Re-voices `source` with the style of `target`.
    ///
    /// The source is cut into non-overlapping 128-frame windows; a short final window is
    /// filled from the left with the preceding (or, for very short sources, repeated)
    /// frames and only its new frames are kept.
    pub fn convert(&self, source: &Array2<f64>, target: &MelSpectrogram) -> Result<MelSpectrogram> {
        let frames = source.ncols();
        if frames == 0 {
            return Err(Error::EmptyInput("source spectrogram has no frames".into()));
        }
        let style = self.style_of(&target.values)?;

        let mut windows = Vec::new();
        let mut keep = Vec::new();
        if frames < SEGMENT_FRAMES {
            let lead = SEGMENT_FRAMES - frames;
            let idx: Vec<usize> = (0..SEGMENT_FRAMES).map(|j| (j + frames * lead - lead) % frames).collect();
            windows.push(source.select(Axis(1), &idx));
            keep.push(frames);
        } else {
            let full = frames / SEGMENT_FRAMES;
            for w in 0..full {
                windows.push(source.slice(s![.., w * SEGMENT_FRAMES..(w + 1) * SEGMENT_FRAMES]).to_owned());
                keep.push(SEGMENT_FRAMES);
            }
            let rest = frames % SEGMENT_FRAMES;
            if rest > 0 {
                windows.push(source.slice(s![.., frames - SEGMENT_FRAMES..]).to_owned());
                keep.push(rest);
            }
        }

        let views: Vec<_> = windows.iter().map(|w| w.view().insert_axis(Axis(1))).collect();
        let batch = concatenate(Axis(1), &views).expect("equal window shapes");
        let content = self.encode_batch(&batch)?.content;
        let decoded = self.decode_batch(&content, &style.to_batch(windows.len()))?;

        let pieces: Vec<_> = keep
            .iter()
            .enumerate()
            .map(|(w, &k)| decoded.slice(s![.., w, SEGMENT_FRAMES - k..]))
            .collect();
        MelSpectrogram::new(concatenate(Axis(1), &pieces).expect("equal band counts"))
    }

    /// Mean L1 reconstruction loss of a batch and its gradients in [`VcModel::layers`] order.
    pub fn loss_and_gradients(&self, x: &Array3<f64>) -> Result<(f64, Vec<ConvGrad>)> {
        self.check_input(x)?;
        let eps = self.config.epsilon;
        let act = self.config.activation;
        let content_trace = self.encoder.forward(x, eps, act);
        let style_trace = self.style_encoder.as_ref().map(|s| s.forward(x, eps, Activation::None));
        let stats = match &style_trace {
            Some(t) => &t.stats,
            None => &content_trace.stats,
        };
        let content = content_trace.content.as_ref().expect("bottleneck");
        let dec = self.decoder.forward(content, stats, eps);
        let (loss, d_out) = l1_loss_batch(x, &dec.output);
        let (d_content, d_stats, dec_grads) = self.decoder.backward(&dec, stats, &d_out);

        let mut grads = match (&self.style_encoder, &style_trace) {
            (Some(style), Some(trace)) => {
                let mut g = self.encoder.backward(&content_trace, act, Some(&d_content), None);
                g.extend(style.backward(trace, Activation::None, None, Some(&d_stats)));
                g
            }
            _ => self.encoder.backward(&content_trace, act, Some(&d_content), Some(&d_stats)),
        };
        grads.extend(dec_grads);
        Ok((loss, grads))
    }
}

#[cfg(test)]
mod tests;
