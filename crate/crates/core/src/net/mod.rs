//! The augmented network and its heads.
//!
//! A LeakyReLU trunk maps `x ∈ ℝⁿ` to `n + 1` raw outputs `(ψ, Ψ)`. The
//! heads are `u = S(φ(x))·ABS_∞(ψ)` and `V = Ψ / max(|Ψ|, ε)`, so the sign of
//! `u` always follows `φ` and `V` is a unit vector.
//!
//! Layer convention: `depth = L` means hidden layers `f_0 … f_L`, that is
//! `L + 1` hidden layers of equal width, followed by the output layer. With
//! width 64 in 2D and depth 4 this gives 17,027 parameters.

mod batch;
mod checkpoint;

pub use batch::Trace;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diff::{norm, Dual, Scalar};
use crate::{Error, Result};

/// Floor on `|Ψ|` when normalizing.
pub const NORM_EPS: f64 = 1e-12;

/// Layer sizes of a fully connected trunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub dim: usize,
    pub width: usize,
    pub depth: usize,
    /// `dim + 1` for the augmented network, 1 for a plain scalar net.
    pub outputs: usize,
}

impl Shape {
    pub fn augmented(dim: usize, width: usize, depth: usize) -> Self {
        Shape {
            dim,
            width,
            depth,
            outputs: dim + 1,
        }
    }

    pub fn scalar(dim: usize, width: usize, depth: usize) -> Self {
        Shape {
            dim,
            width,
            depth,
            outputs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(Error::invalid(format!(
                "dim must be 2 or 3, got {}",
                self.dim
            )));
        }
        if self.width == 0 || self.depth == 0 {
            return Err(Error::invalid("width and depth must be at least 1"));
        }
        if self.outputs == 0 {
            return Err(Error::invalid("output width must be at least 1"));
        }
        Ok(())
    }

    pub fn hidden_layers(&self) -> usize {
        self.depth + 1
    }

    /// Input width of hidden layer `l`.
    pub fn fan_in(&self, l: usize) -> usize {
        if l == 0 {
            self.dim
        } else {
            self.width
        }
    }

    fn layer_offset(&self, l: usize) -> usize {
        if l == 0 {
            0
        } else {
            (self.dim + 1) * self.width + (l - 1) * (self.width + 1) * self.width
        }
    }

    /// Row-major `width × fan_in` weights of hidden layer `l`.
    pub fn weight_range(&self, l: usize) -> Range<usize> {
        let start = self.layer_offset(l);
        start..start + self.width * self.fan_in(l)
    }

    pub fn bias_range(&self, l: usize) -> Range<usize> {
        let start = self.weight_range(l).end;
        start..start + self.width
    }

    /// Row-major `outputs × width` output weights.
    pub fn out_weight_range(&self) -> Range<usize> {
        let start = self.layer_offset(self.hidden_layers());
        start..start + self.outputs * self.width
    }

    pub fn out_bias_range(&self) -> Range<usize> {
        let start = self.out_weight_range().end;
        start..start + self.outputs
    }

    pub fn param_count(&self) -> usize {
        self.out_bias_range().end
    }
}

/// All trainable scalars of a trunk, stored flat in layer order: for each
/// hidden layer its weights then its bias, then the output weights and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    shape: Shape,
    seed: u64,
    data: Vec<f64>,
}

impl NetworkParameters {
    /// Wraps an existing flat buffer.
    pub fn from_flat(shape: Shape, seed: u64, data: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                data.len()
            )));
        }
        Ok(NetworkParameters { shape, seed, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn hidden_weights(&self, l: usize) -> &[f64] {
        &self.data[self.shape.weight_range(l)]
    }

    pub fn hidden_bias(&self, l: usize) -> &[f64] {
        &self.data[self.shape.bias_range(l)]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.data[self.shape.out_weight_range()]
    }

    pub fn output_bias(&self) -> &[f64] {
        &self.data[self.shape.out_bias_range()]
    }

    /// Clamps hidden weights, and the output weights when `include_output`,
    /// to `[-m, m]`. Biases are left alone.
    pub fn clip_weights(&mut self, m: f64, include_output: bool) {
        let shape = self.shape;
        let mut clamp = |r: Range<usize>| {
            for w in &mut self.data[r] {
                *w = w.clamp(-m, m);
            }
        };
        for l in 0..shape.hidden_layers() {
            clamp(shape.weight_range(l));
        }
        if include_output {
            clamp(shape.out_weight_range());
        }
    }

    /// Largest hidden-weight magnitude.
    pub fn max_hidden_weight(&self) -> f64 {
        (0..self.shape.hidden_layers())
            .flat_map(|l| self.hidden_weights(l).iter())
            .fold(0.0f64, |m, w| m.max(w.abs()))
    }

    /// Upper bound on the Lipschitz constant of `ψ` with respect to the
    /// max-norm on inputs: the product of the hidden layers' row-sum norms
    /// times the absolute sum of the first output row.
    pub fn psi_lipschitz_bound(&self) -> f64 {
        let shape = self.shape;
        let mut bound = 1.0;
        for l in 0..shape.hidden_layers() {
            let k = shape.fan_in(l);
            let w = self.hidden_weights(l);
            let row_max = w
                .chunks_exact(k)
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            bound *= row_max;
        }
        let row0 = &self.output_weights()[..shape.width];
        bound * row0.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Uniform `±1/√fan_in` weights, zero biases, reproducible from `seed`.
pub fn init_params(dim: usize, width: usize, depth: usize, seed: u64) -> Result<NetworkParameters> {
    init_shape(Shape::augmented(dim, width, depth), seed)
}

/// [`init_params`] for an arbitrary shape.
pub fn init_shape(shape: Shape, seed: u64) -> Result<NetworkParameters> {
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; shape.param_count()];
    let mut fill = |r: Range<usize>, fan_in: usize, rng: &mut ChaCha8Rng| {
        let a = 1.0 / (fan_in as f64).sqrt();
        for w in &mut data[r] {
            *w = rng.gen_range(-a..=a);
        }
    };
    for l in 0..shape.hidden_layers() {
        fill(shape.weight_range(l), shape.fan_in(l), &mut rng);
    }
    fill(shape.out_weight_range(), shape.width, &mut rng);
    NetworkParameters::from_flat(shape, seed, data)
}

/// Single-output net started near `‖x‖ − radius`: Gaussian hidden weights
/// with standard deviation `√2/√width`, output weights near `√π/√width` and
/// output bias `−radius`.
pub fn init_geometric(
    dim: usize,
    width: usize,
    depth: usize,
    seed: u64,
    radius: f64,
) -> Result<NetworkParameters> {
    let shape = Shape::scalar(dim, width, depth);
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; shape.param_count()];
    let hidden = Normal::new(0.0, (2.0 / width as f64).sqrt()).expect("positive std");
    for l in 0..shape.hidden_layers() {
        for w in &mut data[shape.weight_range(l)] {
            *w = hidden.sample(&mut rng);
        }
    }
    let mean = (std::f64::consts::PI / width as f64).sqrt();
    let out = Normal::new(mean, 1e-5).expect("positive std");
    for w in &mut data[shape.out_weight_range()] {
        *w = out.sample(&mut rng);
    }
    data[shape.out_bias_range()][0] = -radius;
    NetworkParameters::from_flat(shape, seed, data)
}

/// Constants of the smoothed sign `S(y) = γ tanh(βy)` and of `ABS_∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingConstants {
    pub gamma: f64,
    pub beta: f64,
    pub x0: f64,
    pub alpha: f64,
    pub q: f64,
}

impl SmoothingConstants {
    /// `S′(x0) = 0.6·S′(0)`; α makes `(S·ABS_∞)′(x0) = 1`; q makes `ABS_∞`
    /// continuous at `x0`.
    pub fn solve() -> Self {
        let gamma = 1.4;
        let beta = 70.0;
        let t = 0.4f64.sqrt();
        let x0 = t.atanh() / beta;
        let th = (beta * x0).tanh();
        let sech2 = 1.0 - th * th;
        let alpha = 1.0 / (gamma * (beta * sech2 * x0 * x0 + 2.0 * x0 * th));
        let q = alpha * x0 * x0 - x0;
        SmoothingConstants {
            gamma,
            beta,
            x0,
            alpha,
            q,
        }
    }
}

impl Default for SmoothingConstants {
    fn default() -> Self {
        Self::solve()
    }
}

pub fn solve_smoothing_constants() -> SmoothingConstants {
    SmoothingConstants::solve()
}

/// `γ tanh(βy)` with `γ = 1.4`, `β = 70`.
pub fn smoothed_sign(y: f64) -> f64 {
    let c = SmoothingConstants::solve();
    c.gamma * (c.beta * y).tanh()
}

/// `S(y)` and `S′(y)`.
pub fn smoothed_sign_d(y: f64, c: &SmoothingConstants) -> (f64, f64) {
    let t = (c.beta * y).tanh();
    (c.gamma * t, c.gamma * c.beta * (1.0 - t * t))
}

/// `αx²` for `|x| ≤ x0`, `|x| + q` otherwise.
pub fn abs_inf(x: f64, c: &SmoothingConstants) -> f64 {
    abs_inf_d(x, c).0
}

/// `ABS_∞` with its first and second derivatives.
pub fn abs_inf_d(x: f64, c: &SmoothingConstants) -> (f64, f64, f64) {
    if x.abs() <= c.x0 {
        (c.alpha * x * x, 2.0 * c.alpha * x, 2.0 * c.alpha)
    } else if x > 0.0 {
        (x + c.q, 1.0, 0.0)
    } else {
        (-x + c.q, -1.0, 0.0)
    }
}

fn abs_inf_generic<S: Scalar>(x: S, c: &SmoothingConstants) -> S {
    let v = x.value();
    if v.abs() <= c.x0 {
        x * x * c.alpha
    } else if v > 0.0 {
        x + c.q
    } else {
        -x + c.q
    }
}

/// Raw trunk outputs on any scalar type. `param(i)` yields flat parameter `i`.
pub fn trunk<S: Scalar>(shape: &Shape, param: impl Fn(usize) -> S, x: &[S]) -> Result<Vec<S>> {
    let mut h: Vec<S> = x.to_vec();
    for l in 0..shape.hidden_layers() {
        let k = shape.fan_in(l);
        let w0 = shape.weight_range(l).start;
        let b0 = shape.bias_range(l).start;
        let mut next = Vec::with_capacity(shape.width);
        for j in 0..shape.width {
            let mut z = param(b0 + j);
            for (i, &hi) in h.iter().enumerate() {
                z = z + param(w0 + j * k + i) * hi;
            }
            if !z.value().is_finite() {
                return Err(Error::non_finite("hidden activation of layer", l));
            }
            next.push(z.leaky_relu());
        }
        h = next;
    }
    let w0 = shape.out_weight_range().start;
    let b0 = shape.out_bias_range().start;
    let mut out = Vec::with_capacity(shape.outputs);
    for j in 0..shape.outputs {
        let mut z = param(b0 + j);
        for (i, &hi) in h.iter().enumerate() {
            z = z + param(w0 + j * shape.width + i) * hi;
        }
        if !z.value().is_finite() {
            return Err(Error::non_finite("output layer", shape.hidden_layers()));
        }
        out.push(z);
    }
    Ok(out)
}

/// `u = S(φ)·ABS_∞(ψ)` and `V = Ψ/max(|Ψ|, ε)` from raw outputs `(ψ, Ψ)`.
pub fn heads<S: Scalar>(raw: &[S], phi: S, c: &SmoothingConstants) -> (S, Vec<S>) {
    let s = (phi * c.beta).tanh() * c.gamma;
    let u = s * abs_inf_generic(raw[0], c);
    let big = &raw[1..];
    let nrm = norm(big);
    let denom = if nrm.value() >= NORM_EPS {
        nrm
    } else {
        S::from_f64(NORM_EPS)
    };
    let v = big.iter().map(|&p| p / denom).collect();
    (u, v)
}

/// Network heads at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedOutput {
    pub u: f64,
    pub v: Vec<f64>,
    pub grad_u: Option<Vec<f64>>,
    /// The raw first output `ψ`.
    pub psi: f64,
}

/// Evaluates the heads at `x` given the normalized `φ(x)`.
pub fn forward(params: &NetworkParameters, x: &[f64], phi_at_x: f64) -> Result<AugmentedOutput> {
    check_point(params, x)?;
    let data = params.as_slice();
    let raw = trunk(&params.shape, |i| data[i], x)?;
    let (u, v) = heads(&raw, phi_at_x, &SmoothingConstants::solve());
    Ok(AugmentedOutput {
        u,
        v,
        grad_u: None,
        psi: raw[0],
    })
}

/// [`forward`] plus the exact `∇u`, which needs `∇φ(x)` (normalized).
pub fn forward_with_grad(
    params: &NetworkParameters,
    x: &[f64],
    phi_at_x: f64,
    grad_phi: &[f64],
) -> Result<AugmentedOutput> {
    check_point(params, x)?;
    if grad_phi.len() != x.len() {
        return Err(Error::invalid("grad_phi and x differ in length"));
    }
    match x.len() {
        2 => forward_dual::<2>(params, x, phi_at_x, grad_phi),
        _ => forward_dual::<3>(params, x, phi_at_x, grad_phi),
    }
}

fn forward_dual<const N: usize>(
    params: &NetworkParameters,
    x: &[f64],
    phi: f64,
    grad_phi: &[f64],
) -> Result<AugmentedOutput> {
    let xs = Dual::<f64, N>::seed(std::array::from_fn(|k| x[k]));
    let data = params.as_slice();
    let raw = trunk(&params.shape, |i| Dual::<f64, N>::from_f64(data[i]), &xs)?;
    let phi = Dual {
        v: phi,
        t: std::array::from_fn(|k| grad_phi[k]),
    };
    let (u, v) = heads(&raw, phi, &SmoothingConstants::solve());
    Ok(AugmentedOutput {
        u: u.v,
        v: v.iter().map(|d| d.v).collect(),
        grad_u: Some(u.t.to_vec()),
        psi: raw[0].v,
    })
}

/// Output of a single-output net and its input gradient.
pub fn scalar_forward_with_grad(params: &NetworkParameters, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_point(params, x)?;
    let data = params.as_slice();
    fn run<const N: usize>(shape: &Shape, data: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let xs = Dual::<f64, N>::seed(std::array::from_fn(|k| x[k]));
        let raw = trunk(shape, |i| Dual::<f64, N>::from_f64(data[i]), &xs)?;
        Ok((raw[0].v, raw[0].t.to_vec()))
    }
    match x.len() {
        2 => run::<2>(&params.shape, data, x),
        _ => run::<3>(&params.shape, data, x),
    }
}

/// Heads evaluated on many points at once.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub dim: usize,
    pub u: Vec<f64>,
    /// Flat unit vectors, stride `dim`.
    pub v: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Batched heads at flat `points` with normalized `phi` values. For a
/// single-output net, `u` is the raw output and `V = ∇u/|∇u|`.
pub fn predict(params: &NetworkParameters, points: &[f64], phi: &[f64]) -> Result<Prediction> {
    let shape = params.shape();
    let n = shape.dim;
    if !points.len().is_multiple_of(n) || points.len() / n != phi.len() {
        return Err(Error::invalid("points and phi values do not match"));
    }
    let c = SmoothingConstants::solve();
    let scalar = shape.outputs == 1;
    let mut trace = Trace::new(shape);
    let count = phi.len();
    let mut pred = Prediction {
        dim: n,
        u: Vec::with_capacity(count),
        v: Vec::with_capacity(count * n),
        psi: Vec::with_capacity(count),
    };
    let chunk = 1024;
    for start in (0..count).step_by(chunk) {
        let end = (start + chunk).min(count);
        trace.forward(params, &points[start * n..end * n], scalar);
        for i in 0..end - start {
            let out = trace.output(0, i);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite("network output at point", start + i));
            }
            pred.psi.push(out[0]);
            let (dir, den): (Vec<f64>, f64) = if scalar {
                pred.u.push(out[0]);
                let g: Vec<f64> = (0..n).map(|k| trace.output(1 + k, i)[0]).collect();
                let den = norm(&g).max(NORM_EPS);
                (g, den)
            } else {
                let (s, _) = smoothed_sign_d(phi[start + i], &c);
                pred.u.push(s * abs_inf(out[0], &c));
                let p = out[1..].to_vec();
                let den = norm(&p).max(NORM_EPS);
                (p, den)
            };
            pred.v.extend(dir.iter().map(|d| d / den));
        }
    }
    Ok(pred)
}

fn check_point(params: &NetworkParameters, x: &[f64]) -> Result<()> {
    if x.len() != params.dim() {
        return Err(Error::invalid(format!(
            "point has {} coordinates, network expects {}",
            x.len(),
            params.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::grad_input;

    #[test]
    fn parameter_count_convention() {
        let p = init_params(2, 64, 4, 0).unwrap();
        assert_eq!(p.len(), 17_027);
        let s = p.shape();
        let enumerated: usize = (0..s.hidden_layers())
            .map(|l| s.weight_range(l).len() + s.bias_range(l).len())
            .sum::<usize>()
            + s.out_weight_range().len()
            + s.out_bias_range().len();
        assert_eq!(enumerated, 17_027);
        assert_eq!(
            init_params(3, 32, 4, 0).unwrap().len(),
            3 * 32 + 32 + 4 * (32 * 32 + 32) + 4 * 32 + 4
        );
    }

    #[test]
    fn ranges_tile_the_buffer() {
        let s = Shape::augmented(3, 5, 3);
        let mut next = 0;
        for l in 0..s.hidden_layers() {
            assert_eq!(s.weight_range(l).start, next);
            next = s.bias_range(l).end;
        }
        assert_eq!(s.out_weight_range().start, next);
        assert_eq!(s.out_bias_range().end, s.param_count());
    }

    #[test]
    fn init_is_reproducible_and_bounded() {
        let a = init_params(2, 16, 2, 9).unwrap();
        assert_eq!(a, init_params(2, 16, 2, 9).unwrap());
        assert_ne!(a, init_params(2, 16, 2, 10).unwrap());
        let s = a.shape();
        for l in 0..s.hidden_layers() {
            let bound = 1.0 / (s.fan_in(l) as f64).sqrt();
            assert!(a.hidden_weights(l).iter().all(|w| w.abs() <= bound));
            assert!(a.hidden_bias(l).iter().all(|&b| b == 0.0));
        }
        assert!(matches!(
            init_params(2, 0, 4, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(init_params(2, 4, 0, 1).is_err());
        assert!(init_params(4, 4, 1, 1).is_err());
    }

    #[test]
    fn smoothing_constants() {
        let c = solve_smoothing_constants();
        assert!((c.x0 - 0.010_649_973_635_677_2).abs() < 1e-15);
        let sech2 = 1.0 / (c.beta * c.x0).cosh().powi(2);
        assert!((sech2 - 0.6).abs() < 1e-14);
        // continuity
        assert!((c.alpha * c.x0 * c.x0 - (c.x0 + c.q)).abs() <= 1e-12);
        assert!(c.q < 0.0);
        // (S·ABS)'(x0) = 1
        let (s, ds) = smoothed_sign_d(c.x0, &c);
        let (a, da, _) = abs_inf_d(c.x0, &c);
        assert!((ds * a + s * da - 1.0).abs() < 1e-9);
    }

    #[test]
    fn smoothed_sign_values() {
        assert_eq!(smoothed_sign(0.0), 0.0);
        assert!((smoothed_sign(1.0 / 70.0) - 1.066_231_818_338_070_8).abs() < 1e-15);
        for y in [0.001, 0.3, -2.0, 1e-5] {
            assert_eq!(smoothed_sign(-y), -smoothed_sign(y));
        }
    }

    #[test]
    fn abs_inf_is_even_and_nonnegative() {
        let c = SmoothingConstants::solve();
        assert_eq!(abs_inf(0.0, &c), 0.0);
        for i in 0..100 {
            let x = (i as f64 * 0.731).sin() * 0.05 * (1 + i % 7) as f64;
            assert_eq!(abs_inf(x, &c), abs_inf(-x, &c));
            assert!(abs_inf(x, &c) >= 0.0);
        }
        // derivative jump at x0 is bounded and the value is continuous
        let below = abs_inf(c.x0, &c);
        let above = abs_inf(c.x0 * (1.0 + 1e-15), &c);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn heads_respect_constraints() {
        let p = init_params(2, 8, 2, 3).unwrap();
        let out = forward(&p, &[0.2, -0.4], 0.0).unwrap();
        assert_eq!(out.u, 0.0);
        let out = forward(&p, &[0.2, -0.4], -0.3).unwrap();
        assert!(out.psi != 0.0 && out.u < 0.0);
        assert!((norm(&out.v) - 1.0).abs() < 1e-9);
        assert!(forward(&p, &[0.2], 0.1).is_err());
    }

    #[test]
    fn forward_gradient_matches_finite_differences() {
        let p = init_params(2, 16, 2, 11).unwrap();
        let phi = |x: &[f64]| x[0] * x[0] + 0.5 * x[1] - 0.1;
        let gphi = |x: &[f64]| vec![2.0 * x[0], 0.5];
        let x = [0.31, 0.27];
        let out = forward_with_grad(&p, &x, phi(&x), &gphi(&x)).unwrap();
        let g = out.grad_u.unwrap();
        let h = 1e-4;
        for k in 0..2 {
            let mut a = x;
            let mut b = x;
            a[k] += h;
            b[k] -= h;
            let fd = (forward(&p, &a, phi(&a)).unwrap().u - forward(&p, &b, phi(&b)).unwrap().u)
                / (2.0 * h);
            assert!(
                (g[k] - fd).abs() / fd.abs().max(1e-8) < 1e-5,
                "{k}: {} vs {fd}",
                g[k]
            );
        }
    }

    #[test]
    fn scalar_net_gradient_matches_grad_input() {
        let p = init_shape(Shape::scalar(2, 8, 2), 5).unwrap();
        let x = [0.4, -0.8];
        let (_, g) = scalar_forward_with_grad(&p, &x).unwrap();
        let data = p.as_slice();
        let want = grad_input(
            |d| trunk(&p.shape(), |i| Dual::from_f64(data[i]), d).unwrap()[0],
            x,
        );
        assert_eq!(g, want.to_vec());
    }

    #[test]
    fn batched_prediction_matches_pointwise_forward() {
        let p = init_params(2, 8, 2, 2).unwrap();
        let pts = [0.1, 0.2, -0.7, 0.5, 0.9, -0.9];
        let phi = [0.3, -0.2, 0.0];
        let pred = predict(&p, &pts, &phi).unwrap();
        for i in 0..3 {
            let f = forward(&p, &pts[2 * i..2 * i + 2], phi[i]).unwrap();
            assert!((pred.u[i] - f.u).abs() < 1e-15);
            assert!((pred.v[2 * i] - f.v[0]).abs() < 1e-15);
        }
        assert_eq!(pred.u[2], 0.0);
        let q = init_shape(Shape::scalar(2, 8, 2), 2).unwrap();
        let pred = predict(&q, &pts, &phi).unwrap();
        let (u, g) = scalar_forward_with_grad(&q, &pts[..2]).unwrap();
        assert!((pred.u[0] - u).abs() < 1e-15);
        assert!((pred.v[0] - g[0] / norm(&g)).abs() < 1e-9);
    }

    #[test]
    fn clipping() {
        let mut p = init_params(2, 4, 1, 0).unwrap();
        let before = p.clone();
        p.clip_weights(10.0, true);
        assert_eq!(p, before);
        let r = p.shape().weight_range(1);
        p.as_mut_slice()[r.start] = 0.5;
        let b = p.shape().bias_range(0);
        p.as_mut_slice()[b.start] = 0.5;
        let o = p.shape().out_weight_range();
        p.as_mut_slice()[o.start] = 0.5;
        let mut q = p.clone();
        q.clip_weights(0.1, false);
        assert_eq!(q.as_slice()[r.start], 0.1);
        assert_eq!(q.as_slice()[b.start], 0.5);
        assert_eq!(q.as_slice()[o.start], 0.5);
        p.clip_weights(0.1, true);
        assert_eq!(p.as_slice()[o.start], 0.1);
        assert!(p.max_hidden_weight() <= 0.1);
    }

    #[test]
    fn geometric_init_starts_near_a_sphere() {
        let p = init_geometric(2, 64, 3, 0, 0.5).unwrap();
        assert_eq!(p.shape().outputs, 1);
        let data = p.as_slice();
        // outside should exceed inside
        let inside = trunk(&p.shape(), |i| data[i], &[0.0, 0.0]).unwrap()[0];
        let outside = trunk(&p.shape(), |i| data[i], &[0.9, 0.9]).unwrap()[0];
        assert!(inside < 0.0 && outside > inside);
    }
}
