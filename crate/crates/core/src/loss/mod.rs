//! Training objectives.
//!
//! The ReSDF objective is the plain sum of three batch means:
//!
//! * `L_GM = ‖∇u − V‖²`, gradient matching;
//! * `L_SP = φ(x − uV)²`, the foot point lands on the interface;
//! * `L_RS = ‖V(x) − V̂(x − ηuV)‖²`, where `V̂` is the same head held
//!   constant (no derivative flows through the second evaluation).
//!
//! The PINN baseline is `mean (‖∇u‖ − 1)²` over the batch plus
//! `λ·mean u²` over interface samples.
//!
//! [`LossEngine`] evaluates these with the batched trunk and its hand-written
//! reverse pass; [`reference`] evaluates them on the scalar tape.

pub mod reference;

use serde::Serialize;

use crate::field::{CollocationSet, InterfaceSample, LevelSetField};
use crate::net::{
    abs_inf_d, smoothed_sign_d, NetworkParameters, Shape, SmoothingConstants, Trace, NORM_EPS,
};
use crate::{Error, Result};

pub const DEFAULT_ETA: f64 = 0.99;
pub const DEFAULT_LAMBDA: f64 = 1.0;
const CHUNK: usize = 256;

/// Batch means of the loss terms.
///
/// For ReSDF `total = l_gm + l_sp + l_rs` and `l_eik` is `None`; for the PINN
/// baseline the three ReSDF terms are zero and `total = l_eik`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossReport {
    pub l_gm: f64,
    pub l_sp: f64,
    pub l_rs: f64,
    pub total: f64,
    pub l_eik: Option<f64>,
    pub batch_size: usize,
}

impl LossReport {
    pub fn resdf(l_gm: f64, l_sp: f64, l_rs: f64, batch_size: usize) -> Self {
        LossReport {
            l_gm,
            l_sp,
            l_rs,
            total: l_gm + l_sp + l_rs,
            l_eik: None,
            batch_size,
        }
    }

    pub fn eikonal(l_eik: f64, batch_size: usize) -> Self {
        LossReport {
            total: l_eik,
            l_eik: Some(l_eik),
            batch_size,
            ..Default::default()
        }
    }
}

/// Collocation points with the normalized `φ` and `∇φ` evaluated once.
#[derive(Clone, Debug)]
pub struct PreparedBatch {
    dim: usize,
    x: Vec<f64>,
    phi: Vec<f64>,
    grad_phi: Vec<f64>,
}

impl PreparedBatch {
    pub fn new(field: &LevelSetField, batch: &CollocationSet) -> Result<Self> {
        if field.dim() != batch.dim() {
            return Err(Error::invalid("field and batch dimensions differ"));
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let dim = batch.dim();
        let mut grad_phi = vec![0.0; batch.as_flat().len()];
        let mut phi = Vec::with_capacity(batch.len());
        for (p, g) in batch.iter().zip(grad_phi.chunks_exact_mut(dim)) {
            phi.push(field.eval(p));
            field.grad(p, g);
        }
        Ok(PreparedBatch {
            dim,
            x: batch.as_flat().to_vec(),
            phi,
            grad_phi,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn phi(&self, i: usize) -> f64 {
        self.phi[i]
    }

    pub fn grad_phi(&self, i: usize) -> &[f64] {
        &self.grad_phi[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Row {
    u: f64,
    s: f64,
    s1: f64,
    a1: f64,
    a2: f64,
    nrm: f64,
    p: [f64; 3],
    v: [f64; 3],
    dpsi: [f64; 3],
    r: [f64; 3],
    f: f64,
    gy: [f64; 3],
}

/// Reusable buffers for batched loss evaluation.
#[derive(Clone, Debug)]
pub struct LossEngine {
    shape: Shape,
    main: Trace,
    shifted: Trace,
    out_bar: Vec<f64>,
    z: Vec<f64>,
    rows: Vec<Row>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LossEngine {
    pub fn new(shape: Shape) -> Self {
        LossEngine {
            shape,
            main: Trace::new(shape),
            shifted: Trace::new(shape),
            out_bar: Vec::new(),
            z: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// ReSDF losses on the whole batch. When `grad` is given it is
    /// overwritten with `∂total/∂θ`.
    pub fn resdf(
        &mut self,
        params: &NetworkParameters,
        batch: &PreparedBatch,
        field: &LevelSetField,
        eta: f64,
        mut grad: Option<&mut [f64]>,
    ) -> Result<LossReport> {
        let shape = self.shape;
        if params.shape() != shape || shape.outputs != shape.dim + 1 {
            return Err(Error::invalid(
                "parameters do not match the augmented engine shape",
            ));
        }
        if batch.dim() != shape.dim || field.dim() != shape.dim {
            return Err(Error::invalid("batch, field and network dimensions differ"));
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if let Some(g) = grad.as_deref_mut() {
            if g.len() != params.len() {
                return Err(Error::invalid("gradient buffer has the wrong length"));
            }
            g.fill(0.0);
        }
        let n = shape.dim;
        let o = shape.outputs;
        let c = SmoothingConstants::solve();
        let total_rows = batch.len();
        let inv = 1.0 / total_rows as f64;
        let (mut gm, mut sp, mut rs) = (0.0, 0.0, 0.0);
        let mut y = [0.0; 3];

        for start in (0..total_rows).step_by(CHUNK) {
            let end = (start + CHUNK).min(total_rows);
            let b = end - start;
            self.main
                .forward(params, &batch.x[start * n..end * n], true);
            self.z.resize(b * n, 0.0);
            self.rows.resize(b, Row::default());
            let (mut cgm, mut csp) = (0.0, 0.0);
            for i in 0..b {
                let gi = start + i;
                let x = batch.point(gi);
                let gphi = batch.grad_phi(gi);
                let out = self.main.output(0, i);
                let mut row = Row::default();
                let psi = out[0];
                let (s, s1) = smoothed_sign_d(batch.phi(gi), &c);
                let (a, a1, a2) = abs_inf_d(psi, &c);
                row.s = s;
                row.s1 = s1;
                row.a1 = a1;
                row.a2 = a2;
                row.u = s * a;
                row.p[..n].copy_from_slice(&out[1..o]);
                row.nrm = dot(&row.p[..n], &row.p[..n]).sqrt();
                let den = row.nrm.max(NORM_EPS);
                for k in 0..n {
                    row.v[k] = row.p[k] / den;
                    row.dpsi[k] = self.main.output(1 + k, i)[0];
                    let grad_u = s1 * a * gphi[k] + s * a1 * row.dpsi[k];
                    row.r[k] = grad_u - row.v[k];
                    y[k] = x[k] - row.u * row.v[k];
                    self.z[i * n + k] = x[k] - eta * row.u * row.v[k];
                }
                cgm += dot(&row.r[..n], &row.r[..n]);
                row.f = field.eval(&y[..n]);
                field.grad(&y[..n], &mut row.gy[..n]);
                csp += row.f * row.f;
                if !(cgm.is_finite() && csp.is_finite()) {
                    return Err(Error::non_finite("loss integrand at batch point", gi));
                }
                self.rows[i] = row;
            }
            self.shifted.forward(params, &self.z, false);
            let mut crs = 0.0;
            let want_grad = grad.is_some();
            if want_grad {
                self.out_bar.clear();
                self.out_bar.resize((1 + n) * b * o, 0.0);
            }
            for i in 0..b {
                let row = self.rows[i];
                let ph = &self.shifted.output(0, i)[1..o];
                let den_h = dot(ph, ph).sqrt().max(NORM_EPS);
                let mut diff = [0.0; 3];
                for k in 0..n {
                    diff[k] = row.v[k] - ph[k] / den_h;
                }
                crs += dot(&diff[..n], &diff[..n]);
                if !crs.is_finite() {
                    return Err(Error::non_finite(
                        "loss integrand at batch point",
                        start + i,
                    ));
                }
                if !want_grad {
                    continue;
                }
                let gphi = batch.grad_phi(start + i);
                let mut psi_bar = 0.0;
                let mut v_bar = [0.0; 3];
                let f_bar = 2.0 * row.f * inv;
                let mut yv = 0.0;
                for k in 0..n {
                    let r_bar = 2.0 * row.r[k] * inv;
                    psi_bar += r_bar * (row.s1 * row.a1 * gphi[k] + row.s * row.a2 * row.dpsi[k]);
                    self.out_bar[((1 + k) * b + i) * o] = r_bar * row.s * row.a1;
                    let y_bar = f_bar * row.gy[k];
                    yv += y_bar * row.v[k];
                    v_bar[k] = -r_bar - row.u * y_bar + 2.0 * diff[k] * inv;
                }
                let u_bar = -yv;
                psi_bar += u_bar * row.s * row.a1;
                let base = i * o;
                self.out_bar[base] = psi_bar;
                if row.nrm >= NORM_EPS {
                    let pv = dot(&row.p[..n], &v_bar[..n]);
                    let corr = pv / (row.nrm * row.nrm * row.nrm);
                    for k in 0..n {
                        self.out_bar[base + 1 + k] = v_bar[k] / row.nrm - row.p[k] * corr;
                    }
                } else {
                    for k in 0..n {
                        self.out_bar[base + 1 + k] = v_bar[k] / NORM_EPS;
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                self.main.backward(params, &self.out_bar, g);
            }
            gm += cgm;
            sp += csp;
            rs += crs;
        }
        if let Some(g) = grad.as_deref() {
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::non_finite("parameter gradient", j));
            }
        }
        Ok(LossReport::resdf(gm * inv, sp * inv, rs * inv, total_rows))
    }

    /// PINN eikonal objective on a single-output net. `batch` and `interface`
    /// are flat point buffers.
    pub fn eikonal(
        &mut self,
        params: &NetworkParameters,
        batch: &[f64],
        interface: &[f64],
        lambda: f64,
        mut grad: Option<&mut [f64]>,
    ) -> Result<LossReport> {
        let shape = self.shape;
        if params.shape() != shape || shape.outputs != 1 {
            return Err(Error::invalid(
                "parameters do not match the scalar engine shape",
            ));
        }
        let n = shape.dim;
        if batch.is_empty() || !batch.len().is_multiple_of(n) {
            return Err(Error::invalid("batch is empty or not a multiple of dim"));
        }
        if interface.is_empty() || !interface.len().is_multiple_of(n) {
            return Err(Error::invalid(
                "interface sample is empty or not a multiple of dim",
            ));
        }
        if let Some(g) = grad.as_deref_mut() {
            if g.len() != params.len() {
                return Err(Error::invalid("gradient buffer has the wrong length"));
            }
            g.fill(0.0);
        }
        let total = batch.len() / n;
        let inv = 1.0 / total as f64;
        let mut residual = 0.0;
        for start in (0..total).step_by(CHUNK) {
            let end = (start + CHUNK).min(total);
            let b = end - start;
            self.main.forward(params, &batch[start * n..end * n], true);
            if grad.is_some() {
                self.out_bar.clear();
                self.out_bar.resize((1 + n) * b, 0.0);
            }
            let mut chunk = 0.0;
            for i in 0..b {
                let mut g = [0.0; 3];
                for (k, gk) in g.iter_mut().enumerate().take(n) {
                    *gk = self.main.output(1 + k, i)[0];
                }
                let ng = dot(&g[..n], &g[..n]).sqrt();
                chunk += (ng - 1.0) * (ng - 1.0);
                if !chunk.is_finite() {
                    return Err(Error::non_finite(
                        "eikonal residual at batch point",
                        start + i,
                    ));
                }
                if grad.is_some() && ng > 0.0 {
                    let scale = 2.0 * (ng - 1.0) / ng * inv;
                    for k in 0..n {
                        self.out_bar[(1 + k) * b + i] = scale * g[k];
                    }
                }
            }
            if let Some(gr) = grad.as_deref_mut() {
                self.main.backward(params, &self.out_bar, gr);
            }
            residual += chunk;
        }
        let m = interface.len() / n;
        let inv_m = 1.0 / m as f64;
        let mut boundary = 0.0;
        for start in (0..m).step_by(CHUNK) {
            let end = (start + CHUNK).min(m);
            let b = end - start;
            self.shifted
                .forward(params, &interface[start * n..end * n], false);
            let mut chunk = 0.0;
            self.out_bar.clear();
            self.out_bar.resize(b, 0.0);
            for i in 0..b {
                let u = self.shifted.output(0, i)[0];
                chunk += u * u;
                self.out_bar[i] = 2.0 * lambda * u * inv_m;
            }
            if let Some(gr) = grad.as_deref_mut() {
                if lambda != 0.0 {
                    self.shifted.backward(params, &self.out_bar, gr);
                }
            }
            boundary += chunk;
        }
        let boundary_term = if lambda == 0.0 {
            0.0
        } else {
            lambda * boundary * inv_m
        };
        let l = residual * inv + boundary_term;
        if !l.is_finite() {
            return Err(Error::non_finite("eikonal loss", 0));
        }
        Ok(LossReport::eikonal(l, total))
    }
}

/// Integrand values of the three ReSDF terms at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrands {
    pub gm: f64,
    pub sp: f64,
    pub rs: f64,
}

/// The three integrands for given head values at `x`. `v_hat` is `V` at the
/// shifted point `x − ηuV`.
pub fn integrands(
    field: &LevelSetField,
    x: &[f64],
    u: f64,
    grad_u: &[f64],
    v: &[f64],
    v_hat: &[f64],
) -> Integrands {
    let gm = grad_u.iter().zip(v).map(|(g, w)| (g - w).powi(2)).sum();
    let foot: Vec<f64> = x.iter().zip(v).map(|(a, w)| a - u * w).collect();
    let sp = field.eval(&foot).powi(2);
    let rs = v.iter().zip(v_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Integrands { gm, sp, rs }
}

/// Integrands with the exact signed distance and its gradient substituted
/// for `u` and `V`. `None` when the field has no closed-form distance.
pub fn oracle_integrands(field: &LevelSetField, x: &[f64], eta: f64) -> Option<Integrands> {
    let n = x.len();
    let u = field.exact_sdf(x)?;
    let mut v = vec![0.0; n];
    if !field.exact_sdf_grad(x, &mut v) {
        return None;
    }
    let z: Vec<f64> = x.iter().zip(&v).map(|(a, w)| a - eta * u * w).collect();
    let mut v_hat = vec![0.0; n];
    field.exact_sdf_grad(&z, &mut v_hat);
    Some(integrands(field, x, u, &v, &v, &v_hat))
}

/// PINN residual integrand `(‖∇u‖ − 1)²`.
pub fn eikonal_integrand(grad_u: &[f64]) -> f64 {
    (grad_u.iter().map(|g| g * g).sum::<f64>().sqrt() - 1.0).powi(2)
}

/// All three ReSDF terms and their sum.
pub fn loss_total(
    params: &NetworkParameters,
    batch: &CollocationSet,
    field: &LevelSetField,
    eta: f64,
) -> Result<LossReport> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
    }
    let prepared = PreparedBatch::new(field, batch)?;
    LossEngine::new(params.shape()).resdf(params, &prepared, field, eta, None)
}

pub fn loss_gm(
    params: &NetworkParameters,
    batch: &CollocationSet,
    field: &LevelSetField,
) -> Result<f64> {
    Ok(loss_total(params, batch, field, DEFAULT_ETA)?.l_gm)
}

pub fn loss_sp(
    params: &NetworkParameters,
    batch: &CollocationSet,
    field: &LevelSetField,
) -> Result<f64> {
    Ok(loss_total(params, batch, field, DEFAULT_ETA)?.l_sp)
}

pub fn loss_rs(
    params: &NetworkParameters,
    batch: &CollocationSet,
    field: &LevelSetField,
    eta: f64,
) -> Result<f64> {
    Ok(loss_total(params, batch, field, eta)?.l_rs)
}

/// PINN baseline objective value.
pub fn loss_eikonal_pinn(
    params: &NetworkParameters,
    batch: &CollocationSet,
    interface: &InterfaceSample,
    lambda: f64,
) -> Result<f64> {
    if interface.is_empty() {
        return Err(Error::invalid("interface sample is empty"));
    }
    if batch.dim() != params.dim() || interface.dim() != params.dim() {
        return Err(Error::invalid(
            "batch, interface and network dimensions differ",
        ));
    }
    let report = LossEngine::new(params.shape()).eikonal(
        params,
        batch.as_flat(),
        interface.as_flat(),
        lambda,
        None,
    )?;
    Ok(report.total)
}
