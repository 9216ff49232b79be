use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{resample, AudioClip, TARGET_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Reads a PCM or float WAV file and averages all channels to mono.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let decode_err = |reason: String| Error::Decode { path: path.to_path_buf(), reason };
    let reader = WavReader::open(path).map_err(|e| decode_err(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;

    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| decode_err(e.to_string()))?,
        SampleFormat::Int => {
            let scale = 1.0 / (1_i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| decode_err(e.to_string()))?
        }
    };
    if interleaved.is_empty() {
        return Err(Error::EmptyInput(format!("{} contains no samples", path.display())));
    }

    let mono = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    AudioClip::new(mono, spec.sample_rate).map_err(|e| decode_err(e.to_string()))
}

/// Scales the clip so that max |x| == 1. Silent clips are returned unchanged.
pub fn peak_normalize(mut clip: AudioClip) -> AudioClip {
    let peak = clip.peak();
    if peak > 0.0 {
        clip.samples.iter_mut().for_each(|s| *s /= peak);
    }
    clip
}

/// Decodes, downmixes, resamples to 22.05 kHz and peak-normalizes.
pub fn load_and_normalize(path: &Path) -> Result<AudioClip> {
    let clip = read_wav(path)?;
    let clip = resample(&clip, TARGET_SAMPLE_RATE)?;
    Ok(peak_normalize(clip))
}

/// Writes 16-bit mono PCM. Samples are clipped to [-1, 1].
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::InvalidInput(other.to_string()),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_io)?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        writer.write_sample(v).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}
