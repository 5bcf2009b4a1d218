//! Direction lists and realized-filter tables.
//!
//! Binary filter table layout (all integers and floats little endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `NIIRFFT1` |
//! | 8 | header length `H`, u64 |
//! | `H` | JSON header, space padded to a multiple of 8: `format`, `version`, `tool_version`, `config_hash`, `sample_rate`, `peaks`, `sections_per_ear`, `directions` (`[azimuth_deg, elevation_deg]` pairs) |
//! | rest | per direction, per ear (left, right), per section (low shelf, peaks in order, high shelf): kind `u8` (0 low shelf, 1 peak, 2 high shelf), `fc`, `fb`, `gain_db` as f64 (`fb = 0` for shelves), then `b0, b1, b2, a1, a2` as f64 |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Direction;
use crate::dsp::{peak_coeffs, shelf_coeffs, CascadeParams, ShelfKind};
use crate::error::{Error, Result};

pub const FILTER_TABLE_MAGIC: &[u8; 8] = b"NIIRFFT1";
const RECORD_BYTES: usize = 1 + 8 * 8;

/// Reads `azimuth elevation` pairs in degrees, one per line, separated by whitespace or a
/// comma. Blank lines and `#` comments are skipped.
pub fn parse_directions(text: &str) -> Result<Vec<Direction>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let bad = |why: String| Error::Direction(format!("line {}: {why}", n + 1));
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 values, found {}", fields.len())));
        }
        let parse = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| bad(format!("{f:?} is not a number")))
        };
        let (az, el) = (parse(fields[0])?, parse(fields[1])?);
        out.push(Direction::from_degrees(az, el).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_directions_file(path: &Path) -> Result<Vec<Direction>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_directions(&text)
}

/// One realized section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    /// `low_shelf`, `peak` or `high_shelf`.
    pub kind: String,
    pub fc: f64,
    /// Bandwidth in Hz (0 for shelves).
    pub fb: f64,
    pub gain_db: f64,
    /// Numerator `b0, b1, b2`.
    pub b: [f64; 3],
    /// Denominator `1, a1, a2`.
    pub a: [f64; 3],
}

/// Filters of one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRow {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub left: Vec<FilterSection>,
    pub right: Vec<FilterSection>,
    /// Sampled dB magnitudes (`M/2 + 1` bins per ear) when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_db: Option<Vec<f64>>,
}

/// Realized filters of many directions plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterTable {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub sample_rate: f64,
    pub peaks: usize,
    pub rows: Vec<FilterRow>,
}

pub(crate) fn realize(cascade: &CascadeParams, fs: f64) -> Result<Vec<FilterSection>> {
    let shelf = |p: &crate::dsp::ShelfParams| -> Result<FilterSection> {
        let s = shelf_coeffs(p, fs)?;
        Ok(FilterSection {
            kind: match p.kind {
                ShelfKind::Low => "low_shelf",
                ShelfKind::High => "high_shelf",
            }
            .into(),
            fc: p.fc,
            fb: 0.0,
            gain_db: p.gain_db,
            b: [s.b0, s.b1, s.b2],
            a: [1.0, s.a1, s.a2],
        })
    };
    let mut out = vec![shelf(&cascade.low_shelf)?];
    for p in &cascade.peaks {
        let s = peak_coeffs(p, fs)?;
        out.push(FilterSection {
            kind: "peak".into(),
            fc: p.fc,
            fb: p.fb,
            gain_db: p.gain_db,
            b: [s.b0, s.b1, s.b2],
            a: [1.0, s.a1, s.a2],
        });
    }
    out.push(shelf(&cascade.high_shelf)?);
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    format: String,
    version: u32,
    tool_version: String,
    config_hash: String,
    sample_rate: f64,
    peaks: usize,
    sections_per_ear: usize,
    directions: Vec<[f64; 2]>,
}

fn kind_byte(kind: &str) -> Result<u8> {
    match kind {
        "low_shelf" => Ok(0),
        "peak" => Ok(1),
        "high_shelf" => Ok(2),
        other => Err(Error::Format(format!("unknown section kind {other:?}"))),
    }
}

/// Encodes the binary layout documented at the top of this module. Responses are not
/// stored.
pub fn write_filter_table(table: &FilterTable) -> Result<Vec<u8>> {
    let sections = table.peaks + 2;
    let header = BinaryHeader {
        format: "niirf-filter-table".into(),
        version: 1,
        tool_version: table.tool_version.clone(),
        config_hash: table.config_hash.clone(),
        sample_rate: table.sample_rate,
        peaks: table.peaks,
        sections_per_ear: sections,
        directions: table
            .rows
            .iter()
            .map(|r| [r.azimuth_deg, r.elevation_deg])
            .collect(),
    };
    let mut json = serde_json::to_vec(&header).expect("header serializes");
    while !json.len().is_multiple_of(8) {
        json.push(b' ');
    }
    let mut out = Vec::with_capacity(16 + json.len() + table.rows.len() * 2 * sections * RECORD_BYTES);
    out.extend_from_slice(FILTER_TABLE_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for row in &table.rows {
        for ear in [&row.left, &row.right] {
            if ear.len() != sections {
                return Err(Error::Shape(format!(
                    "row has {} sections, table declares {sections}",
                    ear.len()
                )));
            }
            for s in ear {
                out.push(kind_byte(&s.kind)?);
                for v in [s.fc, s.fb, s.gain_db, s.b[0], s.b[1], s.b[2], s.a[1], s.a[2]] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

/// Decodes [`write_filter_table`] output.
pub fn read_filter_table(bytes: &[u8]) -> Result<FilterTable> {
    let bad = |m: &str| Error::Format(format!("filter table: {m}"));
    if bytes.len() < 16 || &bytes[..8] != FILTER_TABLE_MAGIC {
        return Err(bad("bad magic"));
    }
    let h = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let json = bytes.get(16..16 + h).ok_or_else(|| bad("truncated header"))?;
    let header: BinaryHeader =
        serde_json::from_slice(json).map_err(|e| Error::Format(format!("filter table header: {e}")))?;
    let body = &bytes[16 + h..];
    let per_dir = 2 * header.sections_per_ear * RECORD_BYTES;
    if body.len() != header.directions.len() * per_dir {
        return Err(bad("record section size does not match the header"));
    }
    let mut rows = Vec::with_capacity(header.directions.len());
    for (d, chunk) in header.directions.iter().zip(body.chunks_exact(per_dir.max(1))) {
        let mut ears = [Vec::new(), Vec::new()];
        for (k, rec) in chunk.chunks_exact(RECORD_BYTES).enumerate() {
            let f = |j: usize| f64::from_le_bytes(rec[1 + 8 * j..9 + 8 * j].try_into().expect("8 bytes"));
            let kind = match rec[0] {
                0 => "low_shelf",
                1 => "peak",
                2 => "high_shelf",
                _ => return Err(bad("unknown section kind byte")),
            };
            ears[k / header.sections_per_ear].push(FilterSection {
                kind: kind.into(),
                fc: f(0),
                fb: f(1),
                gain_db: f(2),
                b: [f(3), f(4), f(5)],
                a: [1.0, f(6), f(7)],
            });
        }
        let [left, right] = ears;
        rows.push(FilterRow {
            azimuth_deg: d[0],
            elevation_deg: d[1],
            left,
            right,
            left_db: None,
            right_db: None,
        });
    }
    Ok(FilterTable {
        format: "niirf-filter-table".into(),
        version: header.version,
        tool_version: header.tool_version,
        config_hash: header.config_hash,
        sample_rate: header.sample_rate,
        peaks: header.peaks,
        rows,
    })
}
