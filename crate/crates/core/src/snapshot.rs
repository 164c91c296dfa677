//! Field snapshot files: one JSON header line, a newline, then the raw
//! little-endian `f64` payload in row-major order.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub dim: usize,
    pub n: Vec<usize>,
    pub length: Vec<f64>,
    pub t: f64,
    pub model_name: String,
    pub byte_order: String,
    pub scalar: String,
}

impl SnapshotHeader {
    pub fn for_field(field: &Field, t: f64, model_name: &str) -> Self {
        let grid = field.grid();
        Self {
            format_version: FORMAT_VERSION,
            dim: grid.dim(),
            n: grid.n().to_vec(),
            length: grid.length().to_vec(),
            t,
            model_name: model_name.to_owned(),
            byte_order: "little".into(),
            scalar: "f64".into(),
        }
    }

    fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::HeaderMismatch(m));
        if self.format_version != FORMAT_VERSION {
            return fail(format!("unsupported format_version {}", self.format_version));
        }
        if self.byte_order != "little" || self.scalar != "f64" {
            return fail(format!("unsupported encoding {}/{}", self.byte_order, self.scalar));
        }
        if self.n.len() != self.dim || self.length.len() != self.dim {
            return fail(format!(
                "dim = {} but {} sizes and {} lengths",
                self.dim,
                self.n.len(),
                self.length.len()
            ));
        }
        Ok(())
    }

    /// Payload size in bytes.
    pub fn payload_len(&self) -> usize {
        self.n.iter().product::<usize>() * 8
    }
}

/// A snapshot read back from disk.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub field: Field,
}

pub fn encode_snapshot(field: &Field, t: f64, model_name: &str) -> Result<Vec<u8>> {
    let header = SnapshotHeader::for_field(field, t, model_name);
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    bytes.reserve(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::HeaderMismatch("missing header line".into()))?;
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::HeaderMismatch(format!("unreadable header: {e}")))?;
    header.check()?;
    let payload = &bytes[nl + 1..];
    let expected = header.payload_len();
    if payload.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let grid = SpectralGrid::new(&header.n, &header.length).map_err(|e| Error::HeaderMismatch(e.to_string()))?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
        .collect();
    let field = Field::new(grid, values)?;
    Ok(Snapshot { header, field })
}

pub fn write_snapshot(field: &Field, t: f64, model_name: &str, path: &Path) -> Result<()> {
    let bytes = encode_snapshot(field, t, model_name)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes)
}

/// Reads a snapshot and checks that it lives on `grid`.
pub fn read_snapshot_on(path: &Path, grid: &Arc<SpectralGrid>) -> Result<Snapshot> {
    let snap = read_snapshot(path)?;
    if snap.header.n != grid.n() || snap.header.length != grid.length() {
        return Err(Error::HeaderMismatch(format!(
            "{}: snapshot grid {:?} x {:?} differs from {:?} x {:?}",
            path.display(),
            snap.header.n,
            snap.header.length,
            grid.n(),
            grid.length()
        )));
    }
    let field = Field::new(grid.clone(), snap.field.into_values())?;
    Ok(Snapshot {
        header: snap.header,
        field,
    })
}
