//! MCKP layout (little-endian):
//!
//! ```text
//! "MCKP" | version u32 | u32 length, JSON manifest | f32 data of every tensor in manifest order | u32 CRC32
//! ```
//!
//! The manifest is `{"tensors": [{"name", "shape"}...], "meta": <any JSON>}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, Tensor, TensorError};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"MCKP";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor<f32>)>,
    /// Hyperparameters and anything else the caller wants to keep.
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<Entry>,
    meta: serde_json::Value,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = Manifest {
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| Entry {
                    name: n.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(TensorError::ChecksumMismatch);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(TensorError::ChecksumMismatch);
        }
        let short = || TensorError::Format("unexpected end of data".into());
        if body.len() < 12 {
            return Err(short());
        }
        if &body[..4] != MAGIC {
            return Err(TensorError::BadMagic);
        }
        let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(TensorError::VersionUnsupported(version));
        }
        let len = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
        let json = body.get(12..12 + len).ok_or_else(short)?;
        let manifest: Manifest =
            serde_json::from_slice(json).map_err(|e| TensorError::Format(format!("manifest: {e}")))?;
        let mut pos = 12 + len;
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for e in manifest.tensors {
            let count: usize = e.shape.iter().product();
            let raw = body.get(pos..pos + 4 * count).ok_or_else(short)?;
            pos += 4 * count;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((e.name, Tensor::new(e.shape, data)?));
        }
        if pos != body.len() {
            return Err(TensorError::Format("trailing bytes after tensor data".into()));
        }
        Ok(Checkpoint {
            tensors,
            meta: manifest.meta,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
