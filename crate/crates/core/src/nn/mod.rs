//! Differentiable kernels used by the conversion model and the probes.
//!
//! Feature maps are `Array3<f64>` laid out channel-major as `(channels, batch, frames)`
//! so that a convolution over the whole batch is a single matrix product.

mod activation;
mod adam;
mod conv;
mod loss;
mod norm;
mod pointwise;

pub use activation::{apply_activation, Activation};
pub use adam::{Adam, AdamConfig};
pub use conv::{Conv1d, ConvGrad};
pub use loss::{cross_entropy, l1_loss, l1_loss_batch, Prediction};
pub use norm::{
    adain, adain_backward, adain_batch, channel_stats, channel_stats_batch, instance_norm,
    instance_norm_backward, instance_norm_batch, stats_backward, AdaInCache, Stats,
};
pub use pointwise::{leaky_relu, leaky_relu_backward, mean_over_time, mean_over_time_backward, relu, relu_backward};

/// Total number of trainable scalars in a set of layers.
pub fn count_parameters<'a>(layers: impl IntoIterator<Item = &'a Conv1d>) -> usize {
    layers.into_iter().map(Conv1d::parameter_count).sum()
}

/// Rescales gradients in place so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [ConvGrad], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.weight.iter().chain(g.bias.iter()).map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.weight *= scale;
            g.bias *= scale;
        }
    }
    norm
}
