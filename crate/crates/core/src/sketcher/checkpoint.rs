//! Checkpoint layout:
//!
//! ```text
//! b"ISKT"                magic
//! u64 little-endian      header length in bytes
//! header                 UTF-8 JSON
//! f32 little-endian...   tensors in header order, row-major
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::TENSOR_NAMES;
use super::{ModelParams, SketcherConfig, SketcherError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ISKT";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: SketcherConfig,
    seed: u64,
    offset_scale: f64,
    hidden_size: usize,
    num_mixtures: usize,
    tensors: Vec<TensorInfo>,
}

/// Trained weights with the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: SketcherConfig,
    /// Dataset offset scale the weights were trained at.
    pub offset_scale: f64,
    pub params: ModelParams<f32>,
}

fn bad(msg: impl Into<String>) -> SketcherError {
    SketcherError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(config: SketcherConfig, offset_scale: f64, params: ModelParams<f32>) -> Self {
        Self {
            config,
            offset_scale,
            params,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let header = Header {
            version: FORMAT_VERSION,
            config: self.config.clone(),
            seed: self.config.seed,
            offset_scale: self.offset_scale,
            hidden_size: p.hidden,
            num_mixtures: p.mixtures,
            tensors: TENSOR_NAMES
                .iter()
                .zip(p.shapes())
                .map(|(n, s)| TensorInfo {
                    name: n.to_string(),
                    shape: s,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serialization is infallible");
        let mut out = Vec::with_capacity(12 + json.len() + 4 * p.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in p.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketcherError> {
        if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a sketcher checkpoint"));
        }
        let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(12..12usize.saturating_add(len))
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
        if header.version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        let mut params = ModelParams::<f32>::zeros(header.hidden_size, header.num_mixtures);
        let expected: Vec<TensorInfo> = TENSOR_NAMES
            .iter()
            .zip(params.shapes())
            .map(|(n, s)| TensorInfo {
                name: n.to_string(),
                shape: s,
            })
            .collect();
        if header.tensors != expected {
            return Err(bad("tensor table does not match the declared sizes"));
        }
        let mut data = &bytes[12 + len..];
        if data.len() != 4 * params.param_count() {
            return Err(bad(format!(
                "expected {} bytes of weights, found {}",
                4 * params.param_count(),
                data.len()
            )));
        }
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = f32::from_le_bytes(data[..4].try_into().expect("4 bytes"));
                data = &data[4..];
            }
        }
        if !params.is_finite() {
            return Err(bad("non-finite weight"));
        }
        Ok(Self {
            config: header.config,
            offset_scale: header.offset_scale,
            params,
        })
    }

    /// Short content hash identifying these exact bytes.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SketcherError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SketcherError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// A checkpoint ready for sampling, with its id computed once.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub checkpoint: Checkpoint,
    pub id: String,
}

impl LoadedModel {
    pub fn new(checkpoint: Checkpoint) -> Self {
        let id = checkpoint.id();
        Self { checkpoint, id }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SketcherError> {
        Ok(Self::new(Checkpoint::load(path)?))
    }
}
