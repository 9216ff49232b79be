//! Encoder and decoder stacks with explicit forward traces for backpropagation.

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::nn::{
    adain_backward, adain_batch, instance_norm_backward, instance_norm_batch, leaky_relu,
    leaky_relu_backward, stats_backward, Activation, AdaInCache, Conv1d, ConvGrad, Stats,
};

pub(crate) const LEAKY_SLOPE: f64 = 0.2;

/// Gradients with respect to one layer's `(mu, sigma)`.
pub(crate) type StatsGrad = (Array2<f64>, Array2<f64>);

/// Blocks of conv -> IN -> leaky ReLU, optionally followed by a projection to the bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Encoder {
    pub blocks: Vec<Conv1d>,
    pub out: Option<Conv1d>,
}

#[derive(Debug)]
pub(crate) struct EncoderTrace {
    cols: Vec<Array2<f64>>,
    normed: Vec<Array3<f64>>,
    pub stats: Vec<Stats>,
    out_col: Option<Array2<f64>>,
    pre_activation: Option<Array3<f64>>,
    pub content: Option<Array3<f64>>,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(
        n_mels: usize,
        widths: &[usize],
        bottleneck: Option<usize>,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let mut blocks = Vec::with_capacity(widths.len());
        let mut prev = n_mels;
        for &w in widths {
            blocks.push(Conv1d::new(prev, w, kernel, rng));
            prev = w;
        }
        let out = bottleneck.map(|c| Conv1d::new(prev, c, kernel, rng));
        Self { blocks, out }
    }

    pub fn layers(&self) -> impl Iterator<Item = &Conv1d> {
        self.blocks.iter().chain(self.out.iter())
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        self.blocks.iter_mut().chain(self.out.iter_mut())
    }

    pub fn forward(&self, x: &Array3<f64>, eps: f64, activation: Activation) -> EncoderTrace {
        let mut cols = Vec::with_capacity(self.blocks.len());
        let mut normed_maps = Vec::with_capacity(self.blocks.len());
        let mut stats = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for conv in &self.blocks {
            let (a, col) = conv.forward(&h);
            let (normed, st) = instance_norm_batch(&a, eps);
            h = leaky_relu(&normed, LEAKY_SLOPE);
            cols.push(col);
            normed_maps.push(normed);
            stats.push(st);
        }
        let (out_col, pre_activation, content) = match &self.out {
            Some(out) => {
                let (z, col) = out.forward(&h);
                let c = crate::nn::apply_activation(&z, activation);
                (Some(col), Some(z), Some(c))
            }
            None => (None, None, None),
        };
        EncoderTrace { cols, normed: normed_maps, stats, out_col, pre_activation, content }
    }

    /// Gradients for [`Encoder::layers`] order, given upstream gradients on the content map
    /// and on each block's statistics.
    pub fn backward(
        &self,
        trace: &EncoderTrace,
        activation: Activation,
        d_content: Option<&Array3<f64>>,
        d_stats: Option<&[StatsGrad]>,
    ) -> Vec<ConvGrad> {
        let mut out_grad = None;
        let mut dh: Option<Array3<f64>> = None;
        if let (Some(out), Some(dc)) = (&self.out, d_content) {
            let z = trace.pre_activation.as_ref().expect("traced");
            let c = trace.content.as_ref().expect("traced");
            let dz = activation.backward(z, c, dc);
            let (dx, g) = out.backward(trace.out_col.as_ref().expect("traced"), &dz, true);
            dh = dx;
            out_grad = Some(g);
        }

        let mut grads = vec![None; self.blocks.len()];
        for l in (0..self.blocks.len()).rev() {
            let normed = &trace.normed[l];
            let mut da = match dh.take() {
                Some(dh) => {
                    let dn = leaky_relu_backward(normed, &dh, LEAKY_SLOPE);
                    instance_norm_backward(normed, &trace.stats[l].sigma, &dn)
                }
                None => Array3::zeros(normed.dim()),
            };
            if let Some(ds) = d_stats {
                let (d_mu, d_sigma) = &ds[l];
                da += &stats_backward(normed, d_mu, d_sigma);
            }
            let (dx, g) = self.blocks[l].backward(&trace.cols[l], &da, l > 0);
            dh = dx;
            grads[l] = Some(g);
        }
        let mut grads: Vec<ConvGrad> = grads.into_iter().map(|g| g.expect("every block visited")).collect();
        if let Some(out) = &self.out {
            grads.push(out_grad.unwrap_or_else(|| ConvGrad::zeros_like(out)));
        }
        grads
    }
}

/// Mirrored blocks of conv -> AdaIN(skip statistics) -> leaky ReLU, then a projection to mel bands.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Decoder {
    pub blocks: Vec<Conv1d>,
    pub out: Conv1d,
}

#[derive(Debug)]
pub(crate) struct DecoderTrace {
    cols: Vec<Array2<f64>>,
    caches: Vec<AdaInCache>,
    /// AdaIN outputs before the nonlinearity, in decoder order.
    pub adain_out: Vec<Array3<f64>>,
    out_col: Array2<f64>,
    pub output: Array3<f64>,
}

impl Decoder {
    pub fn new<R: Rng + ?Sized>(n_mels: usize, widths: &[usize], bottleneck: usize, kernel: usize, rng: &mut R) -> Self {
        let mut blocks = Vec::with_capacity(widths.len());
        let mut prev = bottleneck;
        for &w in widths.iter().rev() {
            blocks.push(Conv1d::new(prev, w, kernel, rng));
            prev = w;
        }
        let out = Conv1d::new(prev, n_mels, kernel, rng);
        Self { blocks, out }
    }

    pub fn layers(&self) -> impl Iterator<Item = &Conv1d> {
        self.blocks.iter().chain(std::iter::once(&self.out))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        self.blocks.iter_mut().chain(std::iter::once(&mut self.out))
    }

    /// `stats` is in encoder order; decoder block `j` consumes encoder layer `n - 1 - j`.
    pub fn forward(&self, content: &Array3<f64>, stats: &[Stats], eps: f64) -> DecoderTrace {
        let n = self.blocks.len();
        let mut cols = Vec::with_capacity(n);
        let mut caches = Vec::with_capacity(n);
        let mut adain_out = Vec::with_capacity(n);
        let mut y = content.clone();
        for (j, conv) in self.blocks.iter().enumerate() {
            let (a, col) = conv.forward(&y);
            let (o, cache) = adain_batch(&a, &stats[n - 1 - j], eps);
            y = leaky_relu(&o, LEAKY_SLOPE);
            cols.push(col);
            caches.push(cache);
            adain_out.push(o);
        }
        let (output, out_col) = self.out.forward(&y);
        DecoderTrace { cols, caches, adain_out, out_col, output }
    }

    /// Returns `(d_content, d_stats in encoder order, grads in layers() order)`.
    pub fn backward(&self, trace: &DecoderTrace, stats: &[Stats], d_out: &Array3<f64>) -> (Array3<f64>, Vec<StatsGrad>, Vec<ConvGrad>) {
        let n = self.blocks.len();
        let (dy, out_grad) = self.out.backward(&trace.out_col, d_out, true);
        let mut dy = dy.expect("requested");
        let mut d_stats = vec![None; n];
        let mut grads = vec![None; n];
        for j in (0..n).rev() {
            let l = n - 1 - j;
            let d_o = leaky_relu_backward(&trace.adain_out[j], &dy, LEAKY_SLOPE);
            let (da, d_mu, d_sigma) = adain_backward(&trace.caches[j], &stats[l].sigma, &d_o);
            d_stats[l] = Some((d_mu, d_sigma));
            let (dx, g) = self.blocks[j].backward(&trace.cols[j], &da, true);
            dy = dx.expect("requested");
            grads[j] = Some(g);
        }
        let mut grads: Vec<ConvGrad> = grads.into_iter().map(|g| g.expect("visited")).collect();
        grads.push(out_grad);
        (dy, d_stats.into_iter().map(|d| d.expect("visited")).collect(), grads)
    }
}
