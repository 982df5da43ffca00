//! The NMFT feature file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset size    field
//!      0    4    magic "NMFT"
//!      4    4    version u32 = 1
//!      8    8    m u64            (samples)
//!     16    8    d u64            (feature width)
//!     24    4    num_classes u32  (0 = unlabeled)
//!     28    4    flags u32        (bit 0: labels present; other bits must be 0)
//!     32  4·m·d  features f32, row-major
//!      …  4·m    labels u32       (only when bit 0 is set)
//! ```
//!
//! The payload length must match the header exactly.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NMFT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 32;
pub const FLAG_HAS_LABELS: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub rows: u64,
    pub dim: u64,
    pub num_classes: u32,
    /// Row-major, `rows * dim` values.
    pub features: Vec<f32>,
    pub labels: Option<Vec<u32>>,
}

impl FeatureFile {
    pub fn new(rows: usize, dim: usize, features: Vec<f32>, labels: Option<(Vec<u32>, u32)>) -> Result<Self> {
        let (labels, num_classes) = match labels {
            Some((l, c)) => (Some(l), c),
            None => (None, 0),
        };
        let file = Self { rows: rows as u64, dim: dim as u64, num_classes, features, labels };
        file.validate()?;
        Ok(file)
    }

    /// Byte length of the encoded file.
    pub fn encoded_len(&self) -> u64 {
        expected_len(self.rows, self.dim, self.labels.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.rows.checked_mul(self.dim).ok_or_else(|| Error::Format("m·d overflows".into()))?;
        if self.features.len() as u64 != cells {
            return Err(Error::Validation(format!(
                "{} feature values for a {}x{} matrix",
                self.features.len(),
                self.rows,
                self.dim
            )));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature at sample {}, column {} (byte offset {})",
                pos as u64 / self.dim.max(1),
                pos as u64 % self.dim.max(1),
                HEADER_LEN + 4 * pos as u64
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() as u64 != self.rows {
                return Err(Error::Validation(format!("{} labels for {} samples", labels.len(), self.rows)));
            }
            if let Some(i) = labels.iter().position(|&l| l >= self.num_classes) {
                return Err(Error::Validation(format!(
                    "label {} at sample {i} (byte offset {}) is not below num_classes = {}",
                    labels[i],
                    HEADER_LEN + 4 * cells + 4 * i as u64,
                    self.num_classes
                )));
            }
        }
        Ok(())
    }
}

fn expected_len(rows: u64, dim: u64, labeled: bool) -> u64 {
    HEADER_LEN + 4 * rows * dim + if labeled { 4 * rows } else { 0 }
}

pub fn encode(file: &FeatureFile) -> Vec<u8> {
    let mut out = Vec::with_capacity(file.encoded_len() as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&file.rows.to_le_bytes());
    out.extend_from_slice(&file.dim.to_le_bytes());
    out.extend_from_slice(&file.num_classes.to_le_bytes());
    let flags = if file.labels.is_some() { FLAG_HAS_LABELS } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for v in &file.features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &file.labels {
        for l in labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FeatureFile> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {:?} at byte offset 0 (expected \"NMFT\")", String::from_utf8_lossy(magic))));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version} at byte offset 4")));
    }
    let rows = r.u64()?;
    let dim = r.u64()?;
    let num_classes = r.u32()?;
    let flags = r.u32()?;
    if flags & !FLAG_HAS_LABELS != 0 {
        return Err(Error::Format(format!("unknown flag bits {flags:#x} at byte offset 28")));
    }
    let labeled = flags & FLAG_HAS_LABELS != 0;
    let expected = rows
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(HEADER_LEN + if labeled { 4 * rows } else { 0 }))
        .ok_or_else(|| Error::Format(format!("header sizes m = {rows}, d = {dim} overflow")))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Length { expected, actual });
    }
    if actual > expected {
        return Err(Error::Format(format!(
            "{} unexpected trailing bytes after byte offset {expected}",
            actual - expected
        )));
    }
    let cells = (rows * dim) as usize;
    let features = r.f32s(cells)?;
    let labels = if labeled { Some(r.u32s(rows as usize)?) } else { None };
    let file = FeatureFile { rows, dim, num_classes, features, labels };
    file.validate()?;
    Ok(file)
}

pub fn read_features(path: &Path) -> Result<FeatureFile> {
    decode(&std::fs::read(path)?)
}

pub fn write_features(path: &Path, file: &FeatureFile) -> Result<()> {
    file.validate()?;
    write_atomic(path, &encode(file))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Cursor over a byte slice whose reads fail with [`Error::Length`] at the
/// first missing byte.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Length { expected: end as u64, actual: self.bytes.len() as u64 });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(8 * n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}
