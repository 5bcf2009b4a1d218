//! Checkpoint files.
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `NIIRFCK1` |
//! | 8 | header length `H`, u64 little endian |
//! | `H` | UTF-8 JSON header, space padded to a multiple of 8 |
//! | rest | `f32` little endian: RFF projection, shared tensors, then adapter tensors |
//!
//! The header records the tool version, model config, frequency range table, tensor
//! names and shapes, adapter subjects and free-form metadata (training summary, config
//! hash, recorded evaluation).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FieldConfig, FieldModel, FreqRangeTable, ParamStore, RffEncoder, SubjectAdapter, TensorInfo};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NIIRFCK1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    tool_version: String,
    config: FieldConfig,
    ranges: Option<FreqRangeTable>,
    tensors: Vec<TensorInfo>,
    adapters: Vec<AdapterHeader>,
    metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct AdapterHeader {
    subject: String,
    tensors: Vec<TensorInfo>,
}

/// A model plus metadata as stored on disk. Values are stored as `f32`.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: FieldModel,
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn new(model: FieldModel, metadata: serde_json::Value) -> Self {
        Self { model, metadata }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let header = Header {
            format: "niirf-checkpoint".into(),
            version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: m.config().clone(),
            ranges: m.ranges().cloned(),
            tensors: m.params().tensors().to_vec(),
            adapters: m
                .adapters()
                .iter()
                .map(|(s, a)| AdapterHeader {
                    subject: s.clone(),
                    tensors: a.params().tensors().to_vec(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let mut json = serde_json::to_vec(&header).expect("header serializes");
        while !json.len().is_multiple_of(8) {
            json.push(b' ');
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |vals: &mut dyn Iterator<Item = f64>| {
            for v in vals {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        };
        put(&mut m.rff().projection().iter().copied());
        put(&mut m.params().values().iter().copied());
        for a in m.adapters().values() {
            put(&mut a.params().values().iter().copied());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..)
            .filter(|b| b.len() >= hlen)
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&body[..hlen])
            .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
        if header.format != "niirf-checkpoint" || header.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format {} version {}",
                header.format, header.version
            )));
        }
        let data = &body[hlen..];
        if data.len() % 4 != 0 {
            return Err(bad("tensor data is not a whole number of f32 values"));
        }
        let mut values = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = values.by_ref().take(n).collect();
            if v.len() == n {
                Ok(v)
            } else {
                Err(bad("truncated tensor data"))
            }
        };

        let c = header.config.rff_channels;
        let proj = Array2::from_shape_vec((c, 2), take(2 * c)?).expect("shape");
        let rff = RffEncoder::from_projection(proj);
        let store = |infos: Vec<TensorInfo>, take: &mut dyn FnMut(usize) -> Result<Vec<f64>>| {
            let n = infos.iter().map(TensorInfo::len).sum();
            ParamStore::from_parts(infos, take(n)?)
                .ok_or_else(|| Error::Checkpoint("inconsistent tensor table".into()))
        };
        let params = store(header.tensors, &mut take)?;
        let mut adapters = BTreeMap::new();
        for a in header.adapters {
            let p = store(a.tensors, &mut take)?;
            adapters.insert(
                a.subject,
                SubjectAdapter::from_parts(header.config.conditioning, p),
            );
        }
        if values.next().is_some() {
            return Err(bad("trailing bytes after tensor data"));
        }
        let model = FieldModel::from_parts(header.config, rff, params, header.ranges, adapters)?;
        Ok(Self {
            model,
            metadata: header.metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
