//! Checkpoint files.
//!
//! ```text
//! magic       8 bytes  "DUALNETC"
//! version     u32 LE
//! header_len  u32 LE
//! header      header_len bytes of JSON (CheckpointHeader)
//! payload     f32 LE values of every layer, in header order
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Module;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"DUALNETC";
const FORMAT: &str = "dualnet-checkpoint";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    /// `function`, `spatial` or `feature`.
    pub kind: String,
    pub slots: usize,
    pub layers: Vec<LayerEntry>,
    pub payload_sha256: String,
    /// Free-form provenance (seeds, dataset digests, parent checkpoints).
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

/// A parsed checkpoint: header plus the raw parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    payload: Vec<f32>,
}

fn encode_payload(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

impl Checkpoint {
    pub fn capture<T: Real>(kind: &str, slots: usize, module: &impl Module<T>, meta: BTreeMap<String, String>) -> Self {
        let mut layers = Vec::new();
        let mut payload = Vec::new();
        for p in module.params() {
            layers.push(LayerEntry {
                name: p.name().to_string(),
                shape: p.value().shape().to_vec(),
                trainable: p.trainable(),
            });
            payload.extend(p.value().data().iter().map(|v| v.to_f64_lossy() as f32));
        }
        let header = CheckpointHeader {
            format: FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: kind.into(),
            slots,
            layers,
            payload_sha256: sha256_hex(&encode_payload(&payload)),
            meta,
        };
        Self { header, payload }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 4 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&encode_payload(&self.payload));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Truncated {
                what: "checkpoint preamble".into(),
                expected: 16,
                actual: bytes.len(),
            });
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"
            )));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() < header_len {
            return Err(Error::Truncated {
                what: "checkpoint header".into(),
                expected: 16 + header_len,
                actual: bytes.len(),
            });
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[..header_len])
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        if header.format != FORMAT || header.version != version {
            return Err(Error::Format(format!(
                "checkpoint header declares {} v{}",
                header.format, header.version
            )));
        }
        let raw = &body[header_len..];
        let count: usize = header.layers.iter().map(|l| l.shape.iter().product::<usize>()).sum();
        if raw.len() != 4 * count {
            return Err(Error::Truncated {
                what: "checkpoint payload".into(),
                expected: 4 * count,
                actual: raw.len(),
            });
        }
        let actual = sha256_hex(raw);
        if actual != header.payload_sha256 {
            return Err(Error::Digest {
                what: "checkpoint payload".into(),
                expected: header.payload_sha256.clone(),
                actual,
            });
        }
        let payload = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { header, payload })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Copies values and trainable flags into `module`, whose layer names and
    /// shapes must match the header one for one.
    pub fn restore<T: Real>(&self, kind: &str, module: &mut impl Module<T>) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Format(format!(
                "checkpoint holds a {} network, expected {kind}",
                self.header.kind
            )));
        }
        let params = module.params_mut();
        if params.len() != self.header.layers.len() {
            return Err(Error::shape(format!(
                "checkpoint has {} layers, model has {}",
                self.header.layers.len(),
                params.len()
            )));
        }
        let mut offset = 0;
        for (p, entry) in params.into_iter().zip(&self.header.layers) {
            if p.name() != entry.name {
                return Err(Error::shape(format!(
                    "layer {:?} found where {:?} was expected",
                    entry.name,
                    p.name()
                )));
            }
            if p.value().shape() != entry.shape.as_slice() {
                return Err(Error::shape(format!(
                    "layer {}: checkpoint shape {:?}, model shape {:?}",
                    entry.name,
                    entry.shape,
                    p.value().shape()
                )));
            }
            let n: usize = entry.shape.iter().product();
            let data = self.payload[offset..offset + n]
                .iter()
                .map(|&v| T::from_f64_lossy(f64::from(v)))
                .collect();
            offset += n;
            p.set_value(Tensor::new(entry.shape.clone(), data)?)?;
            p.set_trainable(entry.trainable);
        }
        Ok(())
    }
}
