//! Waveform and log-mel feature handling.

mod griffin_lim;
mod mel;
mod resample;
mod segment;
mod stft;
pub mod store;
mod trim;
mod wav;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub use griffin_lim::{griffin_lim_invert, griffin_lim_waveform, mel_to_magnitude};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz};
pub use resample::resample;
pub use segment::sample_segment;
pub use stft::{istft, stft, Spectrum};
pub use trim::{trim_silence, TRIM_FRAME, TRIM_HOP};
pub use wav::{load_and_normalize, peak_normalize, read_wav, write_wav};

pub const TARGET_SAMPLE_RATE: u32 = 22_050;
pub const N_FFT: usize = 1024;
pub const HOP_LENGTH: usize = 256;
pub const N_MELS: usize = 80;
pub const LOG_FLOOR: f64 = 1e-5;
/// Frames per training segment (about 1.49 s at 22.05 kHz / hop 256).
pub const SEGMENT_FRAMES: usize = 128;
pub const DEFAULT_TRIM_DB: f64 = -40.0;
pub const DEFAULT_GRIFFIN_LIM_ITERS: usize = 60;

/// Mono or already-downmixed audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        ensure_finite(&samples, "audio samples")?;
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framing {
    /// Frames centred on `t * hop`, signal reflect-padded by `n_fft / 2` on both sides.
    CenterReflect,
}

/// Feature extraction settings. Also serialized as the sidecar of every cached mel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub hop: usize,
    pub win: usize,
    pub n_fft: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
    pub framing: Framing,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: TARGET_SAMPLE_RATE,
            n_mels: N_MELS,
            hop: HOP_LENGTH,
            win: N_FFT,
            n_fft: N_FFT,
            fmin: 0.0,
            fmax: TARGET_SAMPLE_RATE as f64 / 2.0,
            log_floor: LOG_FLOOR,
            framing: Framing::CenterReflect,
        }
    }
}

impl MelConfig {
    pub fn floor_value(&self) -> f64 {
        self.log_floor.ln()
    }

    /// Frames produced for `n_samples` under centred framing.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        1 + n_samples / self.hop
    }
}

/// K x T matrix of natural-log mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
}

impl MelSpectrogram {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::EmptyInput("mel spectrogram has no frames".into()));
        }
        ensure_finite(values.iter(), "mel spectrogram")?;
        Ok(Self { values })
    }

    pub fn n_mels(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Fixed-length training crop.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSegment {
    pub values: Array2<f64>,
    /// Start frame in the source spectrogram.
    pub offset: usize,
    /// Number of trailing frames filled with the log floor because the source was short.
    pub padded_frames: usize,
}

impl MelSegment {
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.ncols() != SEGMENT_FRAMES {
            return Err(Error::Shape(format!(
                "segment must have {SEGMENT_FRAMES} frames, got {}",
                values.ncols()
            )));
        }
        ensure_finite(values.iter(), "mel segment")?;
        Ok(Self { values, offset: 0, padded_frames: 0 })
    }

    pub fn n_mels(&self) -> usize {
        self.values.nrows()
    }
}
