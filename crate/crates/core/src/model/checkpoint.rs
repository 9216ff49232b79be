//! Binary checkpoint: magic, format version, a JSON header carrying the model config
//! and tensor table, then little-endian f64 payload.
//!
//! ```text
//! b"AGVCCKPT" | u32 version | u64 header_len | header JSON | f64 data...
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, VcModel};
use crate::error::{Error, Result};
use crate::nn::Conv1d;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AGVCCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the payload, in elements.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

impl VcModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut payload: Vec<f64> = Vec::new();
        for (name, layer) in self.named_layers() {
            let (out, k) = (layer.out_channels(), layer.kernel());
            tensors.push(TensorEntry {
                name: format!("{name}.weight"),
                shape: vec![out, layer.in_channels(), k],
                offset: payload.len(),
            });
            payload.extend(layer.weight.iter());
            tensors.push(TensorEntry { name: format!("{name}.bias"), shape: vec![out], offset: payload.len() });
            payload.extend(layer.bias.iter());
        }
        let header = Header {
            format: "agvc-checkpoint".into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            tensors,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");

        let mut bytes = Vec::with_capacity(20 + header.len() + 8 * payload.len());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&header);
        for v in payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = 20usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..header_end]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let data = &bytes[header_end..];
        if data.len() % 8 != 0 {
            return Err(bad("payload is not a whole number of f64 values"));
        }
        let payload: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

        let mut model = VcModel::new(header.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let names: Vec<String> = model.named_layers().into_iter().map(|(n, _)| n).collect();
        if header.tensors.len() != 2 * names.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, config implies {}",
                header.tensors.len(),
                2 * names.len()
            )));
        }
        let read = |entry: &TensorEntry, expected_name: &str, expected_shape: &[usize]| -> Result<&[f64]> {
            if entry.name != expected_name || entry.shape != expected_shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match {expected_name} {expected_shape:?}",
                    entry.name, entry.shape
                )));
            }
            let len: usize = expected_shape.iter().product();
            payload.get(entry.offset..entry.offset + len).ok_or_else(|| bad("tensor outside payload"))
        };
        for ((name, layer), pair) in names.iter().zip(model.layers_mut()).zip(header.tensors.chunks(2)) {
            let (out, inp, k) = (layer.out_channels(), layer.in_channels(), layer.kernel());
            let w = read(&pair[0], &format!("{name}.weight"), &[out, inp, k])?;
            let b = read(&pair[1], &format!("{name}.bias"), &[out])?;
            *layer = Conv1d::from_parts(
                Array2::from_shape_vec((out, inp * k), w.to_vec()).expect("sized"),
                Array1::from_vec(b.to_vec()),
                k,
            );
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint_bytes(&fs::read(path)?)
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn weights_digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_checkpoint_bytes()))
    }
}
