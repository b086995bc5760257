//! Error norms against exact or point-cloud distance oracles.
//!
//! The domain norm is `(1/|Ω|)·(∫|e|²)^{1/2}` with the integral taken as the
//! sample mean times `|Ω|`, so it equals `√(mean e² / |Ω|)`. The usual
//! root-mean-square error is reported next to it.

use std::io::Write;

use serde::Serialize;

use crate::field::sample_interface;
use crate::field::{
    norm, CollocationSet, InterfaceSample, LevelSetField, PointCloudOracle, DEFAULT_CLOUD_SIZE,
};
use crate::net::{predict, NetworkParameters};
use crate::{Error, Result};

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "sample sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    Ok(())
}

/// `(1/|Ω|)·√(|Ω|·mean e²)`.
pub fn error_l2(pred: &[f64], oracle: &[f64], domain_volume: f64) -> Result<f64> {
    error_l2_vec(pred, oracle, 1, domain_volume)
}

/// [`error_l2`] for flat vector samples with stride `dim`, using the
/// pointwise Euclidean norm.
pub fn error_l2_vec(pred: &[f64], oracle: &[f64], dim: usize, domain_volume: f64) -> Result<f64> {
    check_len(pred, oracle)?;
    if !(domain_volume > 0.0) {
        return Err(Error::invalid("domain volume must be positive"));
    }
    let n = pred.len() / dim;
    let sum: f64 = pred
        .iter()
        .zip(oracle)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((domain_volume * sum / n as f64).sqrt() / domain_volume)
}

/// `√(mean e²)`.
pub fn error_rms(pred: &[f64], oracle: &[f64]) -> Result<f64> {
    check_len(pred, oracle)?;
    let sum: f64 = pred
        .iter()
        .zip(oracle)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// `max |e|`.
pub fn error_linf(pred: &[f64], oracle: &[f64]) -> Result<f64> {
    error_linf_vec(pred, oracle, 1)
}

/// Largest pointwise Euclidean deviation.
pub fn error_linf_vec(pred: &[f64], oracle: &[f64], dim: usize) -> Result<f64> {
    check_len(pred, oracle)?;
    Ok(pred
        .chunks_exact(dim)
        .zip(oracle.chunks_exact(dim))
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// `|[-1,1]^dim|`.
pub fn domain_volume(dim: usize) -> f64 {
    2f64.powi(dim as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Pointcloud,
}

/// Reference signed distance and unit normal field.
#[derive(Clone, Debug)]
pub enum Oracle {
    Exact(LevelSetField),
    Pointcloud(LevelSetField, PointCloudOracle),
}

impl Oracle {
    /// Exact when the field has a closed-form distance, otherwise a point
    /// cloud of about `cloud_size` interface samples.
    pub fn for_field(field: &LevelSetField, cloud_size: usize) -> Result<Self> {
        if field.has_exact_sdf() {
            Ok(Oracle::Exact(field.clone()))
        } else {
            let cloud = sample_interface(field, cloud_size)?;
            Ok(Oracle::Pointcloud(
                field.clone(),
                PointCloudOracle::new(&cloud)?,
            ))
        }
    }

    pub fn default_for(field: &LevelSetField) -> Result<Self> {
        Self::for_field(field, DEFAULT_CLOUD_SIZE)
    }

    pub fn kind(&self) -> OracleKind {
        match self {
            Oracle::Exact(_) => OracleKind::Exact,
            Oracle::Pointcloud(..) => OracleKind::Pointcloud,
        }
    }

    /// Signed distance at `x`, normal written into `normal`.
    pub fn eval(&self, x: &[f64], normal: &mut [f64]) -> f64 {
        match self {
            Oracle::Exact(f) => {
                f.exact_sdf_grad(x, normal);
                f.exact_sdf(x).expect("exact oracle")
            }
            Oracle::Pointcloud(f, cloud) => cloud.sdf_and_direction(f, x, normal),
        }
    }

    /// Distances and normals at every point of `points`.
    pub fn sample(&self, points: &CollocationSet) -> (Vec<f64>, Vec<f64>) {
        let dim = points.dim();
        let mut u = Vec::with_capacity(points.len());
        let mut v = vec![0.0; points.as_flat().len()];
        for (x, n) in points.iter().zip(v.chunks_exact_mut(dim)) {
            u.push(self.eval(x, n));
        }
        (u, v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub l2_u: f64,
    pub linf_u: f64,
    pub rms_u: f64,
    pub l2_v: f64,
    pub linf_v: f64,
    pub l2_v_gamma: f64,
    pub linf_v_gamma: f64,
    pub n_eval_points: usize,
    pub oracle_kind: OracleKind,
}

impl ErrorReport {
    pub fn is_valid(&self) -> bool {
        [
            self.l2_u,
            self.linf_u,
            self.rms_u,
            self.l2_v,
            self.linf_v,
            self.l2_v_gamma,
            self.linf_v_gamma,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Interface errors of a vector field given at the sample points against the
/// sample normals.
pub fn interface_vector_errors(v: &[f64], sample: &InterfaceSample) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::invalid("interface sample is empty"));
    }
    if !sample.has_normals() {
        return Err(Error::invalid("interface sample has no normals"));
    }
    let dim = sample.dim();
    let normals: Vec<f64> = (0..sample.len())
        .flat_map(|i| sample.normal(i).unwrap().to_vec())
        .collect();
    Ok((
        error_l2_vec(v, &normals, dim, domain_volume(dim))?,
        error_linf_vec(v, &normals, dim)?,
    ))
}

/// `V_θ` on the interface sample against its normals. `field` is the field
/// the network was trained on (normalized).
pub fn interface_errors(
    params: &NetworkParameters,
    field: &LevelSetField,
    sample: &InterfaceSample,
) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::invalid("interface sample is empty"));
    }
    let phi: Vec<f64> = sample.iter().map(|p| field.eval(p)).collect();
    let pred = predict(params, sample.as_flat(), &phi)?;
    interface_vector_errors(&pred.v, sample)
}

/// Full report for predicted distances `u` and unit vectors `v` on `points`.
pub fn report_from_samples(
    u: &[f64],
    v: &[f64],
    points: &CollocationSet,
    oracle: &Oracle,
    v_gamma: &[f64],
    sample: &InterfaceSample,
) -> Result<ErrorReport> {
    let dim = points.dim();
    let (u_ref, v_ref) = oracle.sample(points);
    let vol = domain_volume(dim);
    let (l2_v_gamma, linf_v_gamma) = interface_vector_errors(v_gamma, sample)?;
    Ok(ErrorReport {
        l2_u: error_l2(u, &u_ref, vol)?,
        linf_u: error_linf(u, &u_ref)?,
        rms_u: error_rms(u, &u_ref)?,
        l2_v: error_l2_vec(v, &v_ref, dim, vol)?,
        linf_v: error_linf_vec(v, &v_ref, dim)?,
        l2_v_gamma,
        linf_v_gamma,
        n_eval_points: points.len(),
        oracle_kind: oracle.kind(),
    })
}

/// Evaluates a trained network on `points` and on the interface sample.
pub fn evaluate_network(
    params: &NetworkParameters,
    field: &LevelSetField,
    points: &CollocationSet,
    oracle: &Oracle,
    sample: &InterfaceSample,
) -> Result<ErrorReport> {
    let phi: Vec<f64> = points.iter().map(|p| field.eval(p)).collect();
    let pred = predict(params, points.as_flat(), &phi)?;
    let phi_g: Vec<f64> = sample.iter().map(|p| field.eval(p)).collect();
    let pred_g = predict(params, sample.as_flat(), &phi_g)?;
    report_from_samples(&pred.u, &pred.v, points, oracle, &pred_g.v, sample)
}

/// Result of checking the hard constraints of the heads on a probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstraintAudit {
    pub points: usize,
    pub max_norm_deviation: f64,
    pub sign_checked: usize,
    pub sign_violations: usize,
    pub zero_checked: usize,
    pub zero_violations: usize,
}

impl ConstraintAudit {
    pub fn passed(&self) -> bool {
        self.max_norm_deviation <= 1e-9 && self.sign_violations == 0 && self.zero_violations == 0
    }
}

/// Checks `‖V‖ = 1`, `sign u = sign φ` where `|ψ| > 1e-14`, and `u = 0`
/// wherever `φ` is exactly zero.
pub fn audit_hard_constraints(
    params: &NetworkParameters,
    field: &LevelSetField,
    points: &[f64],
) -> Result<ConstraintAudit> {
    let dim = params.dim();
    let phi: Vec<f64> = points.chunks_exact(dim).map(|p| field.eval(p)).collect();
    let pred = predict(params, points, &phi)?;
    let mut audit = ConstraintAudit {
        points: phi.len(),
        max_norm_deviation: 0.0,
        sign_checked: 0,
        sign_violations: 0,
        zero_checked: 0,
        zero_violations: 0,
    };
    for i in 0..phi.len() {
        let dev = (norm(&pred.v[i * dim..(i + 1) * dim]) - 1.0).abs();
        audit.max_norm_deviation = audit.max_norm_deviation.max(dev);
        if phi[i] == 0.0 {
            audit.zero_checked += 1;
            if pred.u[i] != 0.0 {
                audit.zero_violations += 1;
            }
        } else if pred.psi[i].abs() > 1e-14 {
            audit.sign_checked += 1;
            if pred.u[i].signum() != phi[i].signum() || pred.u[i] == 0.0 {
                audit.sign_violations += 1;
            }
        }
    }
    Ok(audit)
}

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub run_id: String,
    pub field: String,
    pub method: String,
    pub n_per_side: usize,
    pub width: usize,
    pub depth: usize,
    pub l2_u: f64,
    pub linf_u: f64,
    pub l2_v: f64,
    pub linf_v: f64,
    pub l2_v_gamma: f64,
    pub linf_v_gamma: f64,
    pub wall_s: f64,
}

impl ResultRow {
    pub fn new(
        run_id: &str,
        field: &str,
        method: &str,
        n_per_side: usize,
        width: usize,
        depth: usize,
        r: &ErrorReport,
        wall_s: f64,
    ) -> Self {
        ResultRow {
            run_id: run_id.into(),
            field: field.into(),
            method: method.into(),
            n_per_side,
            width,
            depth,
            l2_u: r.l2_u,
            linf_u: r.linf_u,
            l2_v: r.l2_v,
            linf_v: r.linf_v,
            l2_v_gamma: r.l2_v_gamma,
            linf_v_gamma: r.linf_v_gamma,
            wall_s,
        }
    }
}

/// Writes rows with a header line.
pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "run_id",
            "field",
            "method",
            "n_per_side",
            "width",
            "depth",
            "l2_u",
            "linf_u",
            "l2_v",
            "linf_v",
            "l2_v_gamma",
            "linf_v_gamma",
            "wall_s",
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
