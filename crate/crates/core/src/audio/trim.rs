use super::AudioClip;
use crate::error::{Error, Result};

pub const TRIM_FRAME: usize = 2048;
pub const TRIM_HOP: usize = 512;

/// Removes leading and trailing frames whose RMS sits more than `threshold_db`
/// below the clip peak. Interior samples are copied verbatim.
pub fn trim_silence(clip: &AudioClip, threshold_db: f64) -> Result<AudioClip> {
    if !(threshold_db < 0.0) {
        return Err(Error::InvalidInput(format!(
            "trim threshold must be negative dB, got {threshold_db}"
        )));
    }
    let peak = clip.peak();
    if clip.is_empty() || peak == 0.0 {
        return Err(Error::EmptyInput("clip is entirely silent".into()));
    }
    let len = clip.len();
    let n_frames = if len <= TRIM_FRAME { 1 } else { 1 + (len - TRIM_FRAME).div_ceil(TRIM_HOP) };
    let frame_range = |f: usize| {
        let start = f * TRIM_HOP;
        start..(start + TRIM_FRAME).min(len)
    };
    let linear_threshold = peak * 10f64.powf(threshold_db / 20.0);
    let loud = |f: usize| {
        let r = frame_range(f);
        let n = r.len() as f64;
        let rms = (clip.samples[r].iter().map(|s| s * s).sum::<f64>() / n).sqrt();
        rms > linear_threshold
    };

    let first = (0..n_frames).find(|&f| loud(f));
    let last = (0..n_frames).rev().find(|&f| loud(f));
    match (first, last) {
        (Some(first), Some(last)) => {
            let start = frame_range(first).start;
            let end = frame_range(last).end;
            AudioClip::new(clip.samples[start..end].to_vec(), clip.sample_rate)
        }
        _ => Err(Error::EmptyInput("no frame above the silence threshold".into())),
    }
}
