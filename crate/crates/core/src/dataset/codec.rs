//! Binary record blobs: a 16-byte header followed by row-major
//! little-endian `f32` values.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "WSCN"
//!      4     1  format version
//!      5     1  record kind
//!      6     2  planes (u16 LE)
//!      8     4  rows   (u32 LE)
//!     12     4  cols   (u32 LE)
//!     16     -  planes * rows * cols f32 LE
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::polarimetry::SEQUENCE_LEN;

pub const MAGIC: [u8; 4] = *b"WSCN";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
/// Largest payload accepted by the decoder, in values (1 GiB of `f32`).
pub const MAX_VALUES: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum RecordKind {
    /// One plane: a B-scan, probe position x range sample.
    BScan = 1,
    /// One plane: a focused magnitude image, probe position x depth.
    Image = 2,
    /// Two planes of equal shape: network input B-scan, then target image.
    BScanPair = 3,
    /// Two planes of one row: co-pol then cross-pol sequence.
    PolSample = 4,
}

impl RecordKind {
    pub fn from_u8(v: u8) -> Option<RecordKind> {
        match v {
            1 => Some(RecordKind::BScan),
            2 => Some(RecordKind::Image),
            3 => Some(RecordKind::BScanPair),
            4 => Some(RecordKind::PolSample),
            _ => None,
        }
    }

    pub fn planes(self) -> usize {
        match self {
            RecordKind::BScan | RecordKind::Image => 1,
            RecordKind::BScanPair | RecordKind::PolSample => 2,
        }
    }
}

/// A decoded blob: `planes x rows x cols` values of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    kind: RecordKind,
    data: Array3<f32>,
}

fn check_shape(kind: RecordKind, planes: usize, rows: usize, cols: usize) -> Result<(), FormatError> {
    if planes != kind.planes() {
        return Err(FormatError::InvalidMetadata(format!(
            "{kind:?} record needs {} planes, header says {planes}",
            kind.planes()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(FormatError::InvalidMetadata(format!("empty {rows}x{cols} record")));
    }
    if kind == RecordKind::PolSample && (rows != 1 || cols != SEQUENCE_LEN) {
        return Err(FormatError::InvalidMetadata(format!(
            "sequence pair must be 1x{SEQUENCE_LEN}, got {rows}x{cols}"
        )));
    }
    Ok(())
}

fn first_non_finite<'a>(values: impl IntoIterator<Item = &'a f32>) -> Option<usize> {
    values.into_iter().position(|v| !v.is_finite())
}

impl Record {
    pub fn new(kind: RecordKind, data: Array3<f32>) -> Result<Record, FormatError> {
        let (p, r, c) = data.dim();
        check_shape(kind, p, r, c)?;
        if p.checked_mul(r).and_then(|n| n.checked_mul(c)).map_or(true, |n| n > MAX_VALUES) {
            return Err(FormatError::Oversized);
        }
        if let Some(index) = first_non_finite(data.iter()) {
            return Err(FormatError::NonFinite { index });
        }
        Ok(Record { kind, data })
    }

    pub fn bscan(data: ArrayView2<f32>) -> Result<Record, FormatError> {
        Record::new(RecordKind::BScan, data.to_owned().insert_axis(Axis(0)))
    }

    pub fn image(data: ArrayView2<f32>) -> Result<Record, FormatError> {
        Record::new(RecordKind::Image, data.to_owned().insert_axis(Axis(0)))
    }

    pub fn pair<'a>(input: ArrayView2<'a, f32>, target: ArrayView2<'a, f32>) -> Result<Record, FormatError> {
        if input.dim() != target.dim() {
            return Err(FormatError::InvalidMetadata(format!(
                "pair planes differ: {:?} vs {:?}",
                input.dim(),
                target.dim()
            )));
        }
        let data = ndarray::stack(Axis(0), &[input, target]).expect("equal shapes");
        Record::new(RecordKind::BScanPair, data)
    }

    pub fn polsample(co: &[f32], cross: &[f32]) -> Result<Record, FormatError> {
        if co.len() != cross.len() {
            return Err(FormatError::InvalidMetadata("channel lengths differ".into()));
        }
        let mut data = Array3::zeros((2, 1, co.len()));
        data.slice_mut(ndarray::s![0, 0, ..]).assign(&ndarray::aview1(co));
        data.slice_mut(ndarray::s![1, 0, ..]).assign(&ndarray::aview1(cross));
        Record::new(RecordKind::PolSample, data)
    }

    pub fn kind(&self) -> RecordKind {
        self.kind
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn plane(&self, i: usize) -> ArrayView2<'_, f32> {
        self.data.index_axis(Axis(0), i)
    }

    pub fn into_plane(self, i: usize) -> Array2<f32> {
        self.data.index_axis_move(Axis(0), i)
    }

    /// Co- and cross-pol sequences of a sequence pair.
    pub fn sequences(&self) -> Option<(Vec<f32>, Vec<f32>)> {
        (self.kind == RecordKind::PolSample).then(|| {
            (
                self.data.slice(ndarray::s![0, 0, ..]).to_vec(),
                self.data.slice(ndarray::s![1, 0, ..]).to_vec(),
            )
        })
    }
}

pub fn encode_record(r: &Record) -> Vec<u8> {
    let (p, rows, cols) = r.data.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * r.data.len());
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    out.push(r.kind as u8);
    out.extend_from_slice(&(p as u16).to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in r.data.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_record(bytes: &[u8]) -> Result<Record, FormatError> {
    let magic_len = bytes.len().min(MAGIC.len());
    if bytes[..magic_len] != MAGIC[..magic_len] {
        return Err(FormatError::BadHeader);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(FormatError::VersionMismatch {
            expected: FORMAT_VERSION,
            found: bytes[4],
        });
    }
    let kind = RecordKind::from_u8(bytes[5]).ok_or(FormatError::UnknownKind(bytes[5]))?;
    let planes = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    check_shape(kind, planes, rows, cols)?;
    let count = planes
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .filter(|n| *n <= MAX_VALUES)
        .ok_or(FormatError::Oversized)?;
    let needed = HEADER_LEN + 4 * count;
    if bytes.len() < needed {
        return Err(FormatError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(FormatError::TrailingBytes(bytes.len() - needed));
    }
    let values: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(index) = first_non_finite(&values) {
        return Err(FormatError::NonFinite { index });
    }
    let data = Array3::from_shape_vec((planes, rows, cols), values).expect("length checked");
    Ok(Record { kind, data })
}

pub fn write_record(path: &Path, r: &Record) -> Result<()> {
    fs::write(path, encode_record(r)).map_err(|e| Error::io(path, e))
}

pub fn read_record(path: &Path) -> Result<Record> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_record(&bytes)?)
}
