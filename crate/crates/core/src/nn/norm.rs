//! Instance normalization and adaptive instance normalization.
//!
//! Statistics are taken per (channel, item) over the time axis with the biased
//! variance: `sigma = sqrt(var + eps)`.

use ndarray::{Array1, Array2, Array3, Axis};

use crate::error::{ensure_finite, Error, Result};

/// Channel-wise mean and stabilized standard deviation, each `(channels, batch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub mu: Array2<f64>,
    pub sigma: Array2<f64>,
}

pub fn channel_stats_batch(z: &Array3<f64>, eps: f64) -> Stats {
    let (channels, batch, frames) = z.dim();
    let n = frames as f64;
    let mut mu = Array2::zeros((channels, batch));
    let mut sigma = Array2::zeros((channels, batch));
    for c in 0..channels {
        for b in 0..batch {
            let row = z.slice(ndarray::s![c, b, ..]);
            let m = row.sum() / n;
            let var = row.fold(0.0, |acc, &v| acc + (v - m) * (v - m)) / n;
            mu[[c, b]] = m;
            sigma[[c, b]] = (var + eps).sqrt();
        }
    }
    Stats { mu, sigma }
}

fn normalize_with(z: &Array3<f64>, stats: &Stats) -> Array3<f64> {
    let mu = stats.mu.view().insert_axis(Axis(2));
    let sigma = stats.sigma.view().insert_axis(Axis(2));
    (z - &mu) / &sigma
}

/// Returns the normalized map together with the statistics it removed.
pub fn instance_norm_batch(z: &Array3<f64>, eps: f64) -> (Array3<f64>, Stats) {
    let stats = channel_stats_batch(z, eps);
    (normalize_with(z, &stats), stats)
}

/// Gradient of the normalized output with respect to the input, given the upstream gradient.
pub fn instance_norm_backward(normed: &Array3<f64>, sigma: &Array2<f64>, d_normed: &Array3<f64>) -> Array3<f64> {
    let mean_d = d_normed.mean_axis(Axis(2)).expect("frames > 0").insert_axis(Axis(2));
    let mean_dy = (d_normed * normed).mean_axis(Axis(2)).expect("frames > 0").insert_axis(Axis(2));
    let sigma = sigma.view().insert_axis(Axis(2));
    (d_normed - &mean_d - &(normed * &mean_dy)) / &sigma
}

/// Gradient reaching the input through the statistics themselves.
pub fn stats_backward(normed: &Array3<f64>, d_mu: &Array2<f64>, d_sigma: &Array2<f64>) -> Array3<f64> {
    let n = normed.len_of(Axis(2)) as f64;
    let d_mu = d_mu.view().insert_axis(Axis(2));
    let d_sigma = d_sigma.view().insert_axis(Axis(2));
    (normed * &d_sigma + &d_mu) / n
}

#[derive(Debug, Clone)]
pub struct AdaInCache {
    pub normed: Array3<f64>,
    pub sigma: Array2<f64>,
}

/// `sigma_t * IN(h) + mu_t` with externally supplied target statistics.
pub fn adain_batch(h: &Array3<f64>, target: &Stats, eps: f64) -> (Array3<f64>, AdaInCache) {
    let (normed, own) = instance_norm_batch(h, eps);
    let mu = target.mu.view().insert_axis(Axis(2));
    let sigma = target.sigma.view().insert_axis(Axis(2));
    let out = &normed * &sigma + &mu;
    (out, AdaInCache { normed, sigma: own.sigma })
}

/// Returns `(dh, d_mu_target, d_sigma_target)`.
pub fn adain_backward(cache: &AdaInCache, target_sigma: &Array2<f64>, d_out: &Array3<f64>) -> (Array3<f64>, Array2<f64>, Array2<f64>) {
    let d_mu = d_out.sum_axis(Axis(2));
    let d_sigma = (d_out * &cache.normed).sum_axis(Axis(2));
    let d_normed = d_out * &target_sigma.view().insert_axis(Axis(2));
    let dh = instance_norm_backward(&cache.normed, &cache.sigma, &d_normed);
    (dh, d_mu, d_sigma)
}

fn check_matrix(z: &Array2<f64>, eps: f64) -> Result<()> {
    if z.ncols() == 0 {
        return Err(Error::InvalidInput("need at least one frame".into()));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be finite and non-negative, got {eps}")));
    }
    ensure_finite(z.iter(), "feature map")
}

fn as_batch(z: &Array2<f64>) -> Array3<f64> {
    z.view().insert_axis(Axis(1)).to_owned()
}

/// Per-row mean and `sqrt(var + eps)` of a `channels x frames` matrix.
pub fn channel_stats(z: &Array2<f64>, eps: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    check_matrix(z, eps)?;
    let stats = channel_stats_batch(&as_batch(z), eps);
    Ok((stats.mu.column(0).to_owned(), stats.sigma.column(0).to_owned()))
}

pub fn instance_norm(z: &Array2<f64>, eps: f64) -> Result<Array2<f64>> {
    check_matrix(z, eps)?;
    let (normed, stats) = instance_norm_batch(&as_batch(z), eps);
    if stats.sigma.iter().any(|&s| s == 0.0) {
        return Err(Error::InvalidInput("zero-variance channel with epsilon 0".into()));
    }
    Ok(normed.index_axis_move(Axis(1), 0))
}

pub fn adain(h: &Array2<f64>, mu: &Array1<f64>, sigma: &Array1<f64>, eps: f64) -> Result<Array2<f64>> {
    check_matrix(h, eps)?;
    if mu.len() != h.nrows() || sigma.len() != h.nrows() {
        return Err(Error::Shape(format!(
            "feature map has {} channels but style has {} means and {} deviations",
            h.nrows(),
            mu.len(),
            sigma.len()
        )));
    }
    ensure_finite(mu.iter().chain(sigma.iter()), "style statistics")?;
    if sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidInput("style deviations must be positive".into()));
    }
    let target = Stats {
        mu: mu.view().insert_axis(Axis(1)).to_owned(),
        sigma: sigma.view().insert_axis(Axis(1)).to_owned(),
    };
    let (out, cache) = adain_batch(&as_batch(h), &target, eps);
    if cache.sigma.iter().any(|&s| s == 0.0) {
        return Err(Error::InvalidInput("zero-variance channel with epsilon 0".into()));
    }
    Ok(out.index_axis_move(Axis(1), 0))
}

/// Elementwise check used by tests and diagnostics.
#[cfg(test)]
pub(crate) fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    ndarray::Zip::from(a).and(b).fold(0.0, |m, x, y| f64::max(m, (x - y).abs()))
}
