//! File-level chains shared by the command-line tools.

use std::path::Path;

use crate::audio::{
    griffin_lim_invert, mel_spectrogram, peak_normalize, read_wav, resample, trim_silence, AudioClip, MelConfig, MelSpectrogram,
};
use crate::error::Result;
use crate::model::VcModel;

/// Audio preprocessing options ahead of feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pub trim_db: Option<f64>,
    pub mel: MelConfig,
}

impl Default for FrontEnd {
    fn default() -> Self {
        Self { trim_db: Some(crate::audio::DEFAULT_TRIM_DB), mel: MelConfig::default() }
    }
}

/// Decode, resample to the feature rate, peak-normalise, trim silence.
pub fn load_clip(path: &Path, front: &FrontEnd) -> Result<AudioClip> {
    let clip = peak_normalize(resample(&read_wav(path)?, front.mel.sample_rate)?);
    match front.trim_db {
        Some(db) => trim_silence(&clip, db),
        None => Ok(clip),
    }
}

/// Log-mel features of a WAV file.
pub fn wav_to_mel(path: &Path, front: &FrontEnd) -> Result<MelSpectrogram> {
    mel_spectrogram(&load_clip(path, front)?, &front.mel)
}

/// Result of converting one source file towards one target file.
#[derive(Debug, Clone)]
pub struct Conversion {
    pub source_mel: MelSpectrogram,
    pub target_mel: MelSpectrogram,
    /// Converted features before the vocoder.
    pub mel: MelSpectrogram,
    pub audio: AudioClip,
}

pub fn convert_files(model: &VcModel, source: &Path, target: &Path, front: &FrontEnd, gl_iterations: usize) -> Result<Conversion> {
    let source_mel = wav_to_mel(source, front)?;
    let target_mel = wav_to_mel(target, front)?;
    let mel = model.convert(&source_mel.values, &target_mel)?;
    let audio = griffin_lim_invert(&mel, gl_iterations, &front.mel)?;
    Ok(Conversion { source_mel, target_mel, mel, audio })
}
