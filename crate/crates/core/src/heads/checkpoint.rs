//! Binary head checkpoints (`NMCK`), little-endian like the feature format.
//!
//! ```text
//! offset size  field
//!      0    4  magic "NMCK"
//!      4    4  version u32 = 1
//!      8    4  kind u32 (0 linear probe, 1 mlp, 2 nmtune)
//!     12    4  activation u32 (0 relu, 1 none)
//!     16    8  input_dim u64
//!     24    8  num_classes u64
//!     32    4  mlp_layers u32
//!     36    4  reserved u32 = 0
//!     40       per MLP layer: weight D×D f64 row-major, bias D f64
//!              classifier: weight D×C f64 row-major, bias C f64
//! ```

use std::path::Path;

use super::model::{Activation, Dense, Head, HeadKind, HeadSpec};
use crate::data::format::{write_atomic, ByteReader};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"NMCK";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

pub fn encode(head: &Head) -> Vec<u8> {
    let spec = &head.spec;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * head.tensors().iter().map(|t| t.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let kind: u32 = match spec.kind {
        HeadKind::LinearProbe => 0,
        HeadKind::Mlp => 1,
        HeadKind::Nmtune => 2,
    };
    let act: u32 = match spec.activation {
        Activation::Relu => 0,
        Activation::None => 1,
    };
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&act.to_le_bytes());
    out.extend_from_slice(&(spec.input_dim as u64).to_le_bytes());
    out.extend_from_slice(&(spec.num_classes as u64).to_le_bytes());
    out.extend_from_slice(&(spec.mlp_layers as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for t in head.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Head> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a head checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let kind = match r.u32()? {
        0 => HeadKind::LinearProbe,
        1 => HeadKind::Mlp,
        2 => HeadKind::Nmtune,
        k => return Err(Error::Format(format!("unknown head kind {k}"))),
    };
    let activation = match r.u32()? {
        0 => Activation::Relu,
        1 => Activation::None,
        a => return Err(Error::Format(format!("unknown activation {a}"))),
    };
    let input_dim = to_usize(r.u64()?)?;
    let num_classes = to_usize(r.u64()?)?;
    let mlp_layers = r.u32()? as usize;
    let _reserved = r.u32()?;
    let spec = HeadSpec { kind, input_dim, num_classes, mlp_layers, activation };
    spec.validate().map_err(|e| Error::Format(e.to_string()))?;

    let d = input_dim;
    let expected = HEADER_LEN as u64
        + 8 * (mlp_layers as u64 * (d as u64 * d as u64 + d as u64) + d as u64 * num_classes as u64 + num_classes as u64);
    if (bytes.len() as u64) < expected {
        return Err(Error::Length { expected, actual: bytes.len() as u64 });
    }
    if bytes.len() as u64 > expected {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint payload", bytes.len() as u64 - expected)));
    }
    let mut dense = |rows: usize, cols: usize| -> Result<Dense> {
        let weight = Matrix::new(rows, cols, r.f64s(rows * cols)?)
            .map_err(|e| Error::Validation(format!("checkpoint weights: {e}")))?;
        let bias = r.f64s(cols)?;
        if bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("checkpoint bias is not finite".into()));
        }
        Ok(Dense { weight, bias })
    };
    let mlp = (0..mlp_layers).map(|_| dense(d, d)).collect::<Result<Vec<_>>>()?;
    let classifier = dense(d, num_classes)?;
    Ok(Head { spec, mlp, classifier })
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("dimension {v} does not fit in memory")))
}

pub fn save(path: &Path, head: &Head) -> Result<()> {
    write_atomic(path, &encode(head))
}

pub fn load(path: &Path) -> Result<Head> {
    decode(&std::fs::read(path)?)
}
