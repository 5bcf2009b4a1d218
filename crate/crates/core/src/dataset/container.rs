//! Single-file HRTF container.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size | content                                                         |
//! |--------|------|-----------------------------------------------------------------|
//! | 0      | 8    | magic `NIIRFHC1`                                                |
//! | 8      | 8    | `u64` byte length `H` of the header, a multiple of 8           |
//! | 16     | `H`  | UTF-8 JSON header, right-padded with spaces                     |
//! | 16+H   | ...  | one payload block per subject, in header order                  |
//!
//! The header is `{"format":"niirf-hrtf-container","version":1,"subjects":[...]}` where each
//! subject entry carries `id`, `sample_rate`, `measurements` (count `N`), `ir_length` (`L`)
//! and an optional `provenance` string.
//!
//! A subject block holds `N` direction records of two `f64` values (azimuth, elevation in
//! radians), followed by `N` impulse-response records of `2L` `f32` values interleaved per
//! sample as `l[0], r[0], l[1], r[1], ...`.
//!
//! Writers emit subjects sorted by id, so `write(load(x))` reproduces a canonical file
//! byte for byte.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Direction, HrtfMeasurement, HrtfSet};
use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &[u8; 8] = b"NIIRFHC1";
const FORMAT_NAME: &str = "niirf-hrtf-container";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    subjects: Vec<SubjectHeader>,
}

#[derive(Serialize, Deserialize)]
struct SubjectHeader {
    id: String,
    sample_rate: f64,
    measurements: usize,
    ir_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

/// Reads a container file into a map keyed by subject id.
pub fn load_container(path: impl AsRef<Path>) -> Result<BTreeMap<String, HrtfSet>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_container(&bytes)
}

/// Parses a container from memory.
pub fn read_container(bytes: &[u8]) -> Result<BTreeMap<String, HrtfSet>> {
    let mut cur = bytes;
    let mut magic = [0u8; 8];
    read_exact(&mut cur, &mut magic, "magic")?;
    if &magic != CONTAINER_MAGIC {
        return Err(Error::Format("bad magic, not an HRTF container".into()));
    }
    let mut len = [0u8; 8];
    read_exact(&mut cur, &mut len, "header length")?;
    let header_len = usize::try_from(u64::from_le_bytes(len))
        .map_err(|_| Error::Format("header length overflows".into()))?;
    if header_len > cur.len() {
        return Err(Error::Format(format!(
            "header length {header_len} exceeds file size"
        )));
    }
    let (text, mut payload) = cur.split_at(header_len);
    let text = std::str::from_utf8(text).map_err(|e| Error::Format(format!("header is not UTF-8: {e}")))?;
    let header: Header =
        serde_json::from_str(text.trim_end()).map_err(|e| Error::Format(format!("header JSON: {e}")))?;
    if header.format != FORMAT_NAME {
        return Err(Error::Format(format!("unknown format {:?}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", header.version)));
    }

    let mut out = BTreeMap::new();
    for sh in header.subjects {
        if sh.ir_length == 0 && sh.measurements > 0 {
            return Err(Error::Format(format!("subject {}: zero IR length", sh.id)));
        }
        let mut dirs = Vec::with_capacity(sh.measurements);
        for index in 0..sh.measurements {
            let az = read_f64(&mut payload, &sh.id)?;
            let el = read_f64(&mut payload, &sh.id)?;
            let direction = Direction::new(az, el).map_err(|e| Error::Measurement {
                subject: sh.id.clone(),
                index,
                reason: e.to_string(),
            })?;
            dirs.push(direction);
        }
        let mut measurements = Vec::with_capacity(sh.measurements);
        for direction in dirs {
            let mut left = Vec::with_capacity(sh.ir_length);
            let mut right = Vec::with_capacity(sh.ir_length);
            for _ in 0..sh.ir_length {
                left.push(read_f32(&mut payload, &sh.id)?);
                right.push(read_f32(&mut payload, &sh.id)?);
            }
            measurements.push(HrtfMeasurement {
                direction,
                left,
                right,
            });
        }
        let mut set = HrtfSet::new(sh.id.clone(), sh.sample_rate, measurements)?;
        if let Some(p) = sh.provenance {
            set = set.with_provenance(p);
        }
        if out.insert(sh.id.clone(), set).is_some() {
            return Err(Error::Format(format!("duplicate subject id {}", sh.id)));
        }
    }
    if !payload.is_empty() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last subject",
            payload.len()
        )));
    }
    Ok(out)
}

/// Serializes sets in canonical (id-sorted) order.
pub fn write_container<'a, W: Write>(mut w: W, sets: impl IntoIterator<Item = &'a HrtfSet>) -> Result<()> {
    let mut sets: Vec<&HrtfSet> = sets.into_iter().collect();
    sets.sort_by(|a, b| a.subject_id().cmp(b.subject_id()));
    let header = Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        subjects: sets
            .iter()
            .map(|s| SubjectHeader {
                id: s.subject_id().to_string(),
                sample_rate: s.sample_rate(),
                measurements: s.len(),
                ir_length: s.ir_len(),
                provenance: s.provenance().map(str::to_string),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&header).expect("header serializes");
    while !text.len().is_multiple_of(8) {
        text.push(' ');
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(CONTAINER_MAGIC);
    buf.extend_from_slice(&(text.len() as u64).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    for s in &sets {
        for m in s.measurements() {
            buf.extend_from_slice(&m.direction.azimuth().to_le_bytes());
            buf.extend_from_slice(&m.direction.elevation().to_le_bytes());
        }
        for m in s.measurements() {
            for (l, r) in m.left.iter().zip(&m.right) {
                buf.extend_from_slice(&l.to_le_bytes());
                buf.extend_from_slice(&r.to_le_bytes());
            }
        }
    }
    w.write_all(&buf).map_err(|e| Error::io("<container writer>", e))
}

pub fn write_container_file<'a>(
    path: impl AsRef<Path>,
    sets: impl IntoIterator<Item = &'a HrtfSet>,
) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    write_container(&mut bytes, sets)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_exact(cur: &mut &[u8], buf: &mut [u8], what: &str) -> Result<()> {
    cur.read_exact(buf)
        .map_err(|_| Error::Format(format!("truncated file while reading {what}")))
}

fn read_f64(cur: &mut &[u8], subject: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(cur, &mut b, &format!("directions of subject {subject}"))?;
    Ok(f64::from_le_bytes(b))
}

fn read_f32(cur: &mut &[u8], subject: &str) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(cur, &mut b, &format!("impulse responses of subject {subject}"))?;
    Ok(f32::from_le_bytes(b))
}
