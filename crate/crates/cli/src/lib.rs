//! Experiment runner behind the `redist` binary: configuration files, single
//! runs, sweeps and checkpoint evaluation.

pub mod config;
pub mod run;

use std::path::Path;

use anyhow::Result;
use redist::field::{catalog_get, grid_points, sample_interface};
use redist::metrics::{
    audit_hard_constraints, evaluate_network, ConstraintAudit, ErrorReport, Oracle,
};
use redist::net::read_checkpoint;

pub use config::{parse_sweep, ExperimentConfig, Method, PointKind};
pub use run::{run, sweep, Manifest, RunOutcome};

/// Error report and constraint audit of a saved network on `field`.
pub fn eval_checkpoint(
    path: &Path,
    field: &str,
    n_per_side: Option<usize>,
) -> Result<(ErrorReport, ConstraintAudit)> {
    let ck = read_checkpoint(path)?;
    let raw = catalog_get(field)?;
    anyhow::ensure!(
        raw.dim() == ck.params.dim(),
        "checkpoint is for dim {} but `{field}` has dim {}",
        ck.params.dim(),
        raw.dim()
    );
    let field = raw.scaled(ck.phi_scale);
    let dim = field.dim();
    let grid = grid_points(dim, n_per_side.unwrap_or(if dim == 2 { 256 } else { 64 }))?;
    let oracle = Oracle::default_for(&field)?;
    let gamma = sample_interface(&field, if dim == 2 { 2000 } else { 4000 })?;
    let report = evaluate_network(&ck.params, &field, &grid, &oracle, &gamma)?;
    let audit = audit_hard_constraints(&ck.params, &field, grid.as_flat())?;
    Ok((report, audit))
}
