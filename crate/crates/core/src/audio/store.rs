//! On-disk mel cache: one `.npy` array per utterance plus a `.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use ndarray_npy::{read_npy, write_npy};
use serde::{Deserialize, Serialize};

use super::{MelConfig, MelSpectrogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSidecar {
    #[serde(flatten)]
    pub config: MelConfig,
    pub frames: usize,
    /// Hash of the audio the features were computed from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_sha256: Option<String>,
}

pub fn sidecar_path(npy: &Path) -> PathBuf {
    npy.with_extension("json")
}

pub fn write_mel(path: &Path, mel: &MelSpectrogram, config: &MelConfig, source_sha256: Option<String>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_npy(path, &mel.values).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let sidecar = MelSidecar { config: config.clone(), frames: mel.frames(), source_sha256 };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<MelSidecar> {
    Ok(serde_json::from_slice(&fs::read(sidecar_path(path))?)?)
}

pub fn read_mel(path: &Path) -> Result<MelSpectrogram> {
    let values: Array2<f64> = read_npy(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    MelSpectrogram::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_and_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spk/utt.npy");
        let mel = MelSpectrogram::new(Array2::from_shape_fn((80, 7), |(k, t)| k as f64 - t as f64 * 0.5)).unwrap();
        let cfg = MelConfig::default();
        write_mel(&path, &mel, &cfg, Some("abc".into())).unwrap();
        assert_eq!(read_mel(&path).unwrap(), mel);
        let side = read_sidecar(&path).unwrap();
        assert_eq!(side.config, cfg);
        assert_eq!(side.frames, 7);

        let json: serde_json::Value = serde_json::from_slice(&fs::read(sidecar_path(&path)).unwrap()).unwrap();
        for key in ["sample_rate", "n_mels", "hop", "win", "log_floor", "framing"] {
            assert!(json.get(key).is_some(), "sidecar lacks {key}");
        }
    }
}
