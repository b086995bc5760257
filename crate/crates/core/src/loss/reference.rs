//! Scalar tape evaluation of the objectives, used to check the batched
//! engine. Slow; meant for small nets and batches.

use crate::diff::{norm, Dual, Scalar, Tape, Var};
use crate::field::LevelSetField;
use crate::net::{heads, trunk, NetworkParameters, SmoothingConstants, NORM_EPS};
use crate::Result;

use super::{LossReport, PreparedBatch};

/// `φ` at tape coordinates: the value from the analytic formula, the partials
/// from the analytic gradient.
fn lift_field<'t>(field: &LevelSetField, y: &[Var<'t>]) -> Var<'t> {
    let yv: Vec<f64> = y.iter().map(|v| v.val()).collect();
    let mut g = vec![0.0; yv.len()];
    field.grad(&yv, &mut g);
    let mut acc = Var::constant(field.eval(&yv));
    for k in 0..yv.len() {
        acc = acc + (y[k] - yv[k]) * g[k];
    }
    acc
}

/// ReSDF losses and `∂total/∂θ`. With `barrier = false` the second
/// evaluation in `L_RS` is differentiated too.
pub fn resdf_loss_and_grad(
    params: &NetworkParameters,
    batch: &PreparedBatch,
    field: &LevelSetField,
    eta: f64,
    barrier: bool,
) -> Result<(LossReport, Vec<f64>)> {
    match params.dim() {
        2 => resdf_n::<2>(params, batch, field, eta, barrier),
        _ => resdf_n::<3>(params, batch, field, eta, barrier),
    }
}

fn resdf_n<const N: usize>(
    params: &NetworkParameters,
    batch: &PreparedBatch,
    field: &LevelSetField,
    eta: f64,
    barrier: bool,
) -> Result<(LossReport, Vec<f64>)> {
    let c = SmoothingConstants::solve();
    let shape = params.shape();
    let tape = Tape::new();
    let theta: Vec<Var<'_>> = params.as_slice().iter().map(|&v| tape.input(v)).collect();
    let inv = 1.0 / batch.len() as f64;
    let zero = Var::constant(0.0);
    let (mut gm, mut sp, mut rs) = (zero, zero, zero);
    for i in 0..batch.len() {
        let x = batch.point(i);
        let xs = Dual::<Var<'_>, N>::seed_vars(std::array::from_fn(|k| Var::constant(x[k])));
        let raw = trunk(&shape, |j| Dual::constant(theta[j]), &xs)?;
        let gphi = batch.grad_phi(i);
        let phi = Dual {
            v: Var::constant(batch.phi(i)),
            t: std::array::from_fn(|k| Var::constant(gphi[k])),
        };
        let (u, v) = heads(&raw, phi, &c);
        let u_val = u.v;
        let v_val: Vec<Var<'_>> = v.iter().map(|d| d.v).collect();
        for k in 0..N {
            let r = u.t[k] - v_val[k];
            gm = gm + r * r;
        }
        let foot: Vec<Var<'_>> = (0..N)
            .map(|k| Var::constant(x[k]) - u_val * v_val[k])
            .collect();
        let f = lift_field(field, &foot);
        sp = sp + f * f;
        let shifted: Vec<Var<'_>> = (0..N)
            .map(|k| Var::constant(x[k]) - u_val * v_val[k] * eta)
            .collect();
        let raw2 = trunk(&shape, |j| theta[j], &shifted)?;
        let big = &raw2[1..];
        let nrm = norm(big);
        let den = if nrm.val() >= NORM_EPS {
            nrm
        } else {
            Var::constant(NORM_EPS)
        };
        for k in 0..N {
            let mut vh = big[k] / den;
            if barrier {
                vh = vh.stop_gradient();
            }
            let d = v_val[k] - vh;
            rs = rs + d * d;
        }
    }
    let (gm, sp, rs) = (gm * inv, sp * inv, rs * inv);
    let total = gm + sp + rs;
    let adj = tape.gradient(total)?;
    let grad = theta.iter().map(|t| adj.wrt(*t)).collect();
    Ok((
        LossReport::resdf(gm.val(), sp.val(), rs.val(), batch.len()),
        grad,
    ))
}

/// PINN objective and its gradient on a single-output net.
pub fn eikonal_loss_and_grad(
    params: &NetworkParameters,
    batch: &[f64],
    interface: &[f64],
    lambda: f64,
) -> Result<(LossReport, Vec<f64>)> {
    match params.dim() {
        2 => eikonal_n::<2>(params, batch, interface, lambda),
        _ => eikonal_n::<3>(params, batch, interface, lambda),
    }
}

fn eikonal_n<const N: usize>(
    params: &NetworkParameters,
    batch: &[f64],
    interface: &[f64],
    lambda: f64,
) -> Result<(LossReport, Vec<f64>)> {
    let shape = params.shape();
    let tape = Tape::new();
    let theta: Vec<Var<'_>> = params.as_slice().iter().map(|&v| tape.input(v)).collect();
    let mut res = Var::constant(0.0);
    let count = batch.len() / N;
    for x in batch.chunks_exact(N) {
        let xs = Dual::<Var<'_>, N>::seed_vars(std::array::from_fn(|k| Var::constant(x[k])));
        let out = trunk(&shape, |j| Dual::constant(theta[j]), &xs)?;
        let d = norm(&out[0].t) - 1.0;
        res = res + d * d;
    }
    let mut bnd = Var::constant(0.0);
    let m = interface.len() / N;
    for x in interface.chunks_exact(N) {
        let xs: Vec<Var<'_>> = x.iter().map(|&c| Var::constant(c)).collect();
        let u = trunk(&shape, |j| theta[j], &xs)?[0];
        bnd = bnd + u * u;
    }
    let total = res / count as f64 + bnd * (lambda / m as f64);
    let adj = tape.gradient(total)?;
    let grad = theta.iter().map(|t| adj.wrt(*t)).collect();
    Ok((LossReport::eikonal(total.val(), count), grad))
}
