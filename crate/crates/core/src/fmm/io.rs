use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GridField;
use crate::{Error, Result};

/// Metadata stored next to a raw value block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    /// Nodes per axis, slowest axis first.
    pub dims: Vec<usize>,
    pub spacing: f64,
    /// Coordinate of node 0 on every axis.
    pub origin: f64,
    pub dtype: String,
}

const DTYPE: &str = "f64le";

/// One row per node: `x[,y[,z]],value`.
pub fn write_csv<W: Write>(out: W, grid: &GridField) -> Result<()> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = AXES[..grid.dim()].to_vec();
    header.push("value");
    w.write_record(&header)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut x = [0.0; 3];
    let mut row = Vec::with_capacity(grid.dim() + 1);
    for (i, v) in grid.values().iter().enumerate() {
        grid.node(i, &mut x);
        row.clear();
        row.extend(x[..grid.dim()].iter().map(|c| c.to_string()));
        row.push(v.to_string());
        w.write_record(&row)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<stem>.bin` (little-endian f64 values) and `<stem>.json`.
pub fn write_raw(dir: &Path, stem: &str, grid: &GridField) -> Result<()> {
    let mut bytes = Vec::with_capacity(grid.len() * 8);
    for v in grid.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let meta = GridSidecar {
        dims: vec![grid.n_per_side(); grid.dim()],
        spacing: grid.spacing(),
        origin: grid.origin(),
        dtype: DTYPE.into(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Parses a raw block and its sidecar text.
pub fn read_raw(bytes: &[u8], sidecar: &str) -> Result<GridField> {
    let meta: GridSidecar =
        serde_json::from_str(sidecar).map_err(|e| Error::Format(e.to_string()))?;
    if meta.dtype != DTYPE {
        return Err(Error::Format(format!("unsupported dtype `{}`", meta.dtype)));
    }
    let Some(&n) = meta.dims.first() else {
        return Err(Error::Format("empty dims".into()));
    };
    if meta.dims.iter().any(|&d| d != n) {
        return Err(Error::Format(
            "grid must have the same node count on every axis".into(),
        ));
    }
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(
            "value block length is not a multiple of 8".into(),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridField::from_values(meta.dims.len(), n, meta.spacing, meta.origin, values)
        .map_err(|e| Error::Format(e.to_string()))
}
