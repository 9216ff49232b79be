use std::f64::consts::PI;

use super::AudioClip;
use crate::error::{Error, Result};

/// Zero crossings of the interpolation kernel on each side.
const HALF_WIDTH: f64 = 32.0;
const ROLLOFF: f64 = 0.95;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
    }
}

/// Band-limited windowed-sinc resampling. Output length is `round(len * to / from)`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidInput("target sample rate must be positive".into()));
    }
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }
    let ratio = target_rate as f64 / clip.sample_rate as f64;
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0) * ROLLOFF;
    let reach = HALF_WIDTH / cutoff;
    let x = &clip.samples;
    let last = x.len() as isize - 1;

    let samples = (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = ((t - reach).ceil() as isize).max(0);
            let hi = ((t + reach).floor() as isize).min(last);
            (lo..=hi)
                .map(|i| {
                    let d = t - i as f64;
                    x[i as usize] * cutoff * sinc(cutoff * d) * blackman(d / reach)
                })
                .sum()
        })
        .collect();
    AudioClip::new(samples, target_rate)
}
