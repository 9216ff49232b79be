//! Fixtures shared by the benchmarks.

use agvc_core::AudioClip;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_batch(channels: usize, batch: usize, frames: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array3::from_shape_simple_fn((channels, batch, frames), || rng.random_range(-1.0..1.0))
}

/// A two-tone clip with a little noise, `secs` long at 22.05 kHz.
pub fn tone_clip(secs: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = (secs * 22_050.0) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / 22_050.0;
            0.5 * (std::f64::consts::TAU * 180.0 * t).sin() + 0.2 * (std::f64::consts::TAU * 910.0 * t).sin() + 0.02 * rng.random_range(-1.0..1.0)
        })
        .collect();
    AudioClip::new(samples, 22_050).expect("valid clip")
}
