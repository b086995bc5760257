//! Parameter checkpoints.
//!
//! Byte layout, all little-endian:
//!
//! | offset | size | field                               |
//! |-------:|-----:|-------------------------------------|
//! | 0      | 8    | magic `LSNETCK1`                    |
//! | 8      | 4    | version (u32, currently 1)          |
//! | 12     | 4    | dim (u32)                           |
//! | 16     | 4    | width (u32)                         |
//! | 20     | 4    | depth (u32)                         |
//! | 24     | 4    | outputs (u32)                       |
//! | 28     | 8    | seed (u64)                          |
//! | 36     | 8    | φ normalization factor (f64)        |
//! | 44     | 8    | parameter count (u64)               |
//! | 52     | 8·n  | parameters (f64), flat layer order  |

use std::path::Path;

use super::{NetworkParameters, Shape};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LSNETCK1";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 52;
const MAX_WIDTH: usize = 1 << 16;
const MAX_DEPTH: usize = 1 << 10;

/// Parameters together with the factor that was applied to `φ` in training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParameters,
    pub phi_scale: f64,
}

pub fn encode_checkpoint(params: &NetworkParameters, phi_scale: f64) -> Vec<u8> {
    let s = params.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [s.dim, s.width, s.depth, s.outputs] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&params.seed().to_le_bytes());
    out.extend_from_slice(&phi_scale.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "checkpoint too short ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = u32_at(bytes, 8);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let dim = u32_at(bytes, 12) as usize;
    let width = u32_at(bytes, 16) as usize;
    let depth = u32_at(bytes, 20) as usize;
    let outputs = u32_at(bytes, 24) as usize;
    if width > MAX_WIDTH || depth > MAX_DEPTH || !(outputs == 1 || outputs == dim + 1) {
        return Err(Error::Format(format!(
            "implausible shape dim={dim} width={width} depth={depth} outputs={outputs}"
        )));
    }
    let shape = Shape {
        dim,
        width,
        depth,
        outputs,
    };
    shape.validate().map_err(|e| Error::Format(e.to_string()))?;
    let seed = u64_at(bytes, 28);
    let phi_scale = f64::from_le_bytes(bytes[36..44].try_into().expect("8 bytes"));
    if !(phi_scale.is_finite() && phi_scale > 0.0) {
        return Err(Error::Format(format!("invalid phi scale {phi_scale}")));
    }
    let count = u64_at(bytes, 44);
    if count != shape.param_count() as u64 {
        return Err(Error::Format(format!(
            "parameter count {count} does not match shape ({})",
            shape.param_count()
        )));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * shape.param_count() {
        return Err(Error::Format(format!(
            "expected {} parameter bytes, found {}",
            8 * shape.param_count(),
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite parameter at index {i}")));
    }
    Ok(Checkpoint {
        params: NetworkParameters::from_flat(shape, seed, data)?,
        phi_scale,
    })
}

pub fn write_checkpoint(path: &Path, params: &NetworkParameters, phi_scale: f64) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params, phi_scale))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;

    #[test]
    fn round_trip() {
        let p = init_params(3, 5, 2, 77).unwrap();
        let bytes = encode_checkpoint(&p, 0.25);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * p.len());
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.params, p);
        assert_eq!(back.phi_scale, 0.25);
    }

    #[test]
    fn header_layout() {
        let p = init_params(2, 3, 1, 0x0102030405060708).unwrap();
        let b = encode_checkpoint(&p, 1.0);
        assert_eq!(&b[..8], b"LSNETCK1");
        assert_eq!(u32_at(&b, 12), 2);
        assert_eq!(u32_at(&b, 16), 3);
        assert_eq!(u32_at(&b, 20), 1);
        assert_eq!(u32_at(&b, 24), 3);
        assert_eq!(b[28], 0x08);
        assert_eq!(u64_at(&b, 44), p.len() as u64);
    }

    #[test]
    fn rejects_damage() {
        let p = init_params(2, 4, 1, 1).unwrap();
        let good = encode_checkpoint(&p, 1.0);
        assert!(decode_checkpoint(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = good.clone();
        bad[44] ^= 1;
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = good.clone();
        bad[16..20].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = good;
        let n = bad.len();
        bad[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_checkpoint(&bad).is_err());
    }
}
