//! Checkpoint file: `SDCK` magic, a little-endian `u32` manifest length, the JSON
//! manifest, then every tensor as contiguous little-endian `f32` values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sardiff_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::diffusion::ScheduleParams;
use crate::error::{Error, Result};
use crate::predictor::{Predictor, PredictorConfig, PredictorParams};

pub const MAGIC: &[u8; 4] = b"SDCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the payload.
    pub offset: usize,
    /// Length in bytes.
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub predictor: PredictorConfig,
    pub schedule: ScheduleParams,
    pub iteration: usize,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub predictor: Predictor,
    pub schedule: ScheduleParams,
    pub iteration: usize,
}

impl Checkpoint {
    pub fn new(predictor: Predictor, schedule: ScheduleParams, iteration: usize) -> Self {
        Self { predictor, schedule, iteration }
    }

    pub fn manifest(&self) -> Manifest {
        let mut offset = 0;
        let tensors = self
            .predictor
            .params()
            .iter()
            .map(|(name, t)| {
                let len = t.numel() * 4;
                let entry = TensorEntry { name: name.clone(), shape: t.shape().to_vec(), offset, len };
                offset += len;
                entry
            })
            .collect();
        Manifest {
            format_version: FORMAT_VERSION,
            predictor: self.predictor.config().clone(),
            schedule: self.schedule,
            iteration: self.iteration,
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest()).expect("manifest serializes");
        let payload_len: usize = self.predictor.params().num_scalars() * 4;
        let mut out = Vec::with_capacity(8 + manifest.len() + payload_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(&manifest);
        for (_, t) in self.predictor.params().iter() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses and fully validates a checkpoint; nothing is returned on any inconsistency.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Corrupt("missing SDCK header".into()));
        }
        let manifest_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let manifest_bytes =
            bytes.get(8..8 + manifest_len).ok_or_else(|| Error::Corrupt("manifest extends past end of file".into()))?;
        let version: serde_json::Value =
            serde_json::from_slice(manifest_bytes).map_err(|e| Error::Corrupt(format!("manifest: {e}")))?;
        let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::Version { found, expected: FORMAT_VERSION });
        }
        let manifest: Manifest = serde_json::from_value(version).map_err(|e| Error::Corrupt(format!("manifest: {e}")))?;
        let payload = &bytes[8 + manifest_len..];

        let mut expected_offset = 0;
        let mut tensors = BTreeMap::new();
        for entry in &manifest.tensors {
            let numel: usize = entry.shape.iter().product();
            if entry.offset != expected_offset || entry.len != numel * 4 {
                return Err(Error::Corrupt(format!("tensor `{}` has inconsistent offset/length", entry.name)));
            }
            let raw = payload
                .get(entry.offset..entry.offset + entry.len)
                .ok_or_else(|| Error::Corrupt(format!("payload truncated inside tensor `{}`", entry.name)))?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            let tensor = Tensor::new(entry.shape.clone(), data).map_err(|e| Error::Corrupt(e.to_string()))?;
            if tensors.insert(entry.name.clone(), tensor).is_some() {
                return Err(Error::Corrupt(format!("tensor `{}` listed twice", entry.name)));
            }
            expected_offset += entry.len;
        }
        if payload.len() != expected_offset {
            return Err(Error::Corrupt(format!("payload is {} bytes, manifest describes {expected_offset}", payload.len())));
        }
        manifest.predictor.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        manifest.schedule.build().map_err(|e| Error::Corrupt(e.to_string()))?;
        let params = PredictorParams::from_map(tensors);
        params.check_against(&manifest.predictor).map_err(|e| Error::Corrupt(e.to_string()))?;
        let predictor = Predictor::new(manifest.predictor, params)?;
        Ok(Self { predictor, schedule: manifest.schedule, iteration: manifest.iteration })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
