//! Analytic level set functions and the sampling machinery around them.
//!
//! Every catalog field is defined on all of `ℝⁿ` (not only on `[-1,1]ⁿ`), has a
//! closed-form gradient, and optionally a closed-form signed distance oracle.

mod catalog;
mod interface;
mod points;

pub use catalog::{
    catalog_get, catalog_names, exact_sdf_square, FieldKind, HeartPrefactor, LevelSetField,
    DEFAULT_JUMP_R0,
};
pub use interface::{
    approx_sdf_pointcloud, sample_interface, sample_interface_with, InterfaceSample,
    PointCloudOracle, ScanResolution, BISECTION_STEPS, DEFAULT_CLOUD_SIZE,
};
pub use points::{
    grid_points, normalization_factor, normalize_phi, omega, random_points, CollocationSet,
    Provenance,
};

use std::io::Write;

/// Euclidean norm of a small vector.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Writes one row per point with columns `x[,y[,z]],phi`.
pub fn write_points_csv<W: Write>(
    mut out: W,
    set: &CollocationSet,
    field: &LevelSetField,
) -> std::io::Result<()> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let header: Vec<&str> = AXES[..set.dim()].iter().copied().chain(["phi"]).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in set.iter() {
        for c in p {
            write!(out, "{c},")?;
        }
        writeln!(out, "{}", field.eval(p))?;
    }
    Ok(())
}
