use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProbeConfig;
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, mean_over_time, mean_over_time_backward, relu, relu_backward, Adam, AdamConfig, Conv1d, ConvGrad};

/// Number of convolution layers ahead of the pooled linear head.
pub const PROBE_CONV_LAYERS: usize = 3;

const EVAL_CHUNK: usize = 128;

/// Inputs `(channels, items, frames)` with one class label per item.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    pub inputs: Array3<f64>,
    pub labels: Vec<usize>,
}

impl EmbeddingSet {
    pub fn new(inputs: Array3<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len_of(Axis(1)) != labels.len() || labels.is_empty() {
            return Err(Error::Shape(format!(
                "{} embedding items but {} labels",
                inputs.len_of(Axis(1)),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.inputs.len_of(Axis(0))
    }

    fn select(&self, idx: &[usize]) -> (Array3<f64>, Vec<usize>) {
        (self.inputs.select(Axis(1), idx), idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Conv1d+ReLU stack, temporal mean pooling and a linear speaker head.
#[derive(Debug, Clone)]
pub struct SpeakerProbe {
    convs: Vec<Conv1d>,
    head: Conv1d,
}

struct Trace {
    cols: Vec<Array2<f64>>,
    pre: Vec<Array3<f64>>,
    head_col: Array2<f64>,
    frames: usize,
    logits: Array2<f64>,
}

impl SpeakerProbe {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, n_classes: usize, cfg: &ProbeConfig, rng: &mut R) -> Self {
        let mut convs = Vec::with_capacity(PROBE_CONV_LAYERS);
        let mut c = in_channels;
        for _ in 0..PROBE_CONV_LAYERS {
            convs.push(Conv1d::new(c, cfg.hidden_channels, cfg.kernel_size, rng));
            c = cfg.hidden_channels;
        }
        Self { convs, head: Conv1d::new(c, n_classes, 1, rng) }
    }

    pub fn parameter_count(&self) -> usize {
        self.convs.iter().chain([&self.head]).map(Conv1d::parameter_count).sum()
    }

    fn forward(&self, x: &Array3<f64>) -> Trace {
        let frames = x.len_of(Axis(2));
        let mut h = x.clone();
        let mut cols = Vec::with_capacity(self.convs.len());
        let mut pre = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let (y, col) = conv.forward(&h);
            h = relu(&y);
            cols.push(col);
            pre.push(y);
        }
        let (logits, head_col) = self.head.forward(&mean_over_time(&h));
        let logits = logits.index_axis_move(Axis(2), 0);
        Trace { cols, pre, head_col, frames, logits }
    }

    /// Class scores `(classes, items)`.
    pub fn logits(&self, x: &Array3<f64>) -> Array2<f64> {
        self.forward(x).logits
    }

    pub fn predict(&self, x: &Array3<f64>) -> Vec<usize> {
        let logits = self.logits(x);
        logits
            .columns()
            .into_iter()
            .map(|c| c.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
            .collect()
    }

    fn loss_and_gradients(&self, x: &Array3<f64>, labels: &[usize]) -> (f64, Vec<ConvGrad>) {
        let trace = self.forward(x);
        let pred = cross_entropy(&trace.logits, labels);
        let d_logits = pred.d_logits.insert_axis(Axis(2));
        let (d_pooled, head_grad) = self.head.backward(&trace.head_col, &d_logits, true);
        let mut dh = mean_over_time_backward(&d_pooled.expect("requested"), trace.frames);
        let mut grads = vec![None; self.convs.len()];
        for i in (0..self.convs.len()).rev() {
            let dy = relu_backward(&trace.pre[i], &dh);
            let (dx, g) = self.convs[i].backward(&trace.cols[i], &dy, i > 0);
            grads[i] = Some(g);
            if let Some(dx) = dx {
                dh = dx;
            }
        }
        let mut grads: Vec<ConvGrad> = grads.into_iter().map(|g| g.expect("filled")).collect();
        grads.push(head_grad);
        (pred.loss, grads)
    }

    fn layers_mut(&mut self) -> Vec<&mut Conv1d> {
        self.convs.iter_mut().chain([&mut self.head]).collect()
    }

    /// Fraction of items in `set` classified correctly.
    pub fn accuracy(&self, set: &EmbeddingSet) -> f64 {
        let n = set.len();
        let mut correct = 0;
        let mut start = 0;
        while start < n {
            let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
            let (x, labels) = set.select(&idx);
            correct += self.predict(&x).iter().zip(&labels).filter(|(p, l)| p == l).count();
            start += EVAL_CHUNK;
        }
        correct as f64 / n as f64
    }
}

/// Outcome of fitting a probe on one set and scoring it on another.
#[derive(Debug, Clone)]
pub struct ProbeFit {
    pub probe: SpeakerProbe,
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
    pub eval_accuracy: f64,
}

/// Trains a fresh probe with Adam on random mini-batches of `train`.
pub fn train_probe(train: &EmbeddingSet, eval: &EmbeddingSet, n_classes: usize, cfg: &ProbeConfig) -> Result<ProbeFit> {
    cfg.validate()?;
    if n_classes < 2 {
        return Err(Error::DegenerateProbe(format!("a probe needs at least 2 classes, got {n_classes}")));
    }
    if train.channels() != eval.channels() {
        return Err(Error::Shape(format!("train has {} channels, eval has {}", train.channels(), eval.channels())));
    }
    if let Some(&bad) = train.labels.iter().chain(&eval.labels).find(|&&l| l >= n_classes) {
        return Err(Error::InvalidInput(format!("label {bad} out of range for {n_classes} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = SpeakerProbe::new(train.channels(), n_classes, cfg, &mut rng);
    let mut opt = Adam::new(AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() });
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..train.len())).collect();
        let (x, labels) = train.select(&idx);
        let (loss, grads) = probe.loss_and_gradients(&x, &labels);
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        opt.step_layers(probe.layers_mut(), &grads);
        losses.push(loss);
    }
    let train_accuracy = probe.accuracy(train);
    let eval_accuracy = probe.accuracy(eval);
    Ok(ProbeFit { probe, losses, train_accuracy, eval_accuracy })
}
