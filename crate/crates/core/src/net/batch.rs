//! Batched forward pass with input tangents, and its reverse pass.
//!
//! Rows are grouped in blocks: block 0 holds the values for the `b` points of
//! a chunk, block `1 + k` holds their derivatives along input axis `k`. Every
//! layer is then a single matrix product over all blocks; the bias only
//! enters block 0 and the LeakyReLU slope chosen by block 0 scales every
//! block.

use super::{NetworkParameters, Shape};
use crate::diff::LEAKY_SLOPE;

/// `c = a·b + beta·c` with `c` dense row-major `m × n` and `a`, `b` given by
/// row and column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    // SAFETY: the asserts above bound every index the kernel touches, and `c`
    // does not alias `a` or `b` since it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Activations of one chunk, kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct Trace {
    shape: Shape,
    rows: usize,
    blocks: usize,
    x: Vec<f64>,
    hidden: Vec<Vec<f64>>,
    out: Vec<f64>,
    bar: Vec<f64>,
    bar_next: Vec<f64>,
}

impl Trace {
    pub fn new(shape: Shape) -> Self {
        Trace {
            shape,
            rows: 0,
            blocks: 1,
            x: Vec::new(),
            hidden: vec![Vec::new(); shape.hidden_layers()],
            out: Vec::new(),
            bar: Vec::new(),
            bar_next: Vec::new(),
        }
    }

    /// Points in the last forward call.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// 1 without tangents, `1 + dim` with.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Raw outputs of `row` in `block`.
    pub fn output(&self, block: usize, row: usize) -> &[f64] {
        let o = self.shape.outputs;
        let r = block * self.rows + row;
        &self.out[r * o..(r + 1) * o]
    }

    /// All raw outputs, `blocks·rows × outputs` row-major.
    pub fn outputs(&self) -> &[f64] {
        &self.out
    }

    /// Runs the trunk on the flat points `x`. With `tangents`, also carries
    /// the derivative of every activation along each input axis.
    pub fn forward(&mut self, params: &NetworkParameters, x: &[f64], tangents: bool) {
        let shape = self.shape;
        assert_eq!(params.shape(), shape, "trace built for another shape");
        let dim = shape.dim;
        let w = shape.width;
        let b = x.len() / dim;
        assert_eq!(b * dim, x.len());
        let blocks = if tangents { 1 + dim } else { 1 };
        let rows = blocks * b;
        self.rows = b;
        self.blocks = blocks;
        self.x.clear();
        self.x.extend_from_slice(x);

        for l in 0..shape.hidden_layers() {
            let k = shape.fan_in(l);
            let wl = params.hidden_weights(l);
            let bias = params.hidden_bias(l);
            let mut h = std::mem::take(&mut self.hidden[l]);
            h.resize(rows * w, 0.0);
            if l == 0 {
                gemm(b, k, w, x, (k, 1), wl, (1, k), 0.0, &mut h[..b * w]);
                for t in 1..blocks {
                    for i in 0..b {
                        let row = &mut h[(t * b + i) * w..(t * b + i + 1) * w];
                        for (j, r) in row.iter_mut().enumerate() {
                            *r = wl[j * k + (t - 1)];
                        }
                    }
                }
            } else {
                let prev = &self.hidden[l - 1];
                gemm(rows, k, w, prev, (k, 1), wl, (1, k), 0.0, &mut h);
            }
            activate(&mut h, bias, b, blocks, w);
            self.hidden[l] = h;
        }

        let o = shape.outputs;
        let last = &self.hidden[shape.hidden_layers() - 1];
        self.out.resize(rows * o, 0.0);
        gemm(
            rows,
            w,
            o,
            last,
            (w, 1),
            params.output_weights(),
            (1, w),
            0.0,
            &mut self.out,
        );
        let ob = params.output_bias();
        for row in self.out[..b * o].chunks_exact_mut(o) {
            for (r, bb) in row.iter_mut().zip(ob) {
                *r += bb;
            }
        }
    }

    /// Accumulates into `grad` the parameter gradient of `Σ out_bar · out`,
    /// where `out_bar` has the layout of [`Trace::outputs`].
    pub fn backward(&mut self, params: &NetworkParameters, out_bar: &[f64], grad: &mut [f64]) {
        let shape = self.shape;
        let (w, o, b, blocks) = (shape.width, shape.outputs, self.rows, self.blocks);
        let rows = blocks * b;
        assert_eq!(out_bar.len(), rows * o);
        assert_eq!(grad.len(), shape.param_count());
        let hl = shape.hidden_layers();

        gemm(
            o,
            rows,
            w,
            out_bar,
            (1, o),
            &self.hidden[hl - 1],
            (w, 1),
            1.0,
            &mut grad[shape.out_weight_range()],
        );
        let gb = &mut grad[shape.out_bias_range()];
        for row in out_bar[..b * o].chunks_exact(o) {
            for (g, r) in gb.iter_mut().zip(row) {
                *g += r;
            }
        }
        self.bar.resize(rows * w, 0.0);
        gemm(
            rows,
            o,
            w,
            out_bar,
            (o, 1),
            params.output_weights(),
            (w, 1),
            0.0,
            &mut self.bar,
        );

        for l in (0..hl).rev() {
            let h = &self.hidden[l];
            // dL/dz = slope ⊙ dL/dh, the slope read off the sign of block 0
            let head = &h[..b * w];
            for blk in self.bar[..rows * w].chunks_exact_mut(b * w) {
                for (v, z) in blk.iter_mut().zip(head) {
                    *v *= slope(*z);
                }
            }
            let k = shape.fan_in(l);
            let gb = &mut grad[shape.bias_range(l)];
            for row in self.bar[..b * w].chunks_exact(w) {
                for (g, r) in gb.iter_mut().zip(row) {
                    *g += r;
                }
            }
            let gw = &mut grad[shape.weight_range(l)];
            if l == 0 {
                gemm(w, b, k, &self.bar, (1, w), &self.x, (k, 1), 1.0, gw);
                for t in 1..blocks {
                    for row in self.bar[t * b * w..(t + 1) * b * w].chunks_exact(w) {
                        for (j, r) in row.iter().enumerate() {
                            gw[j * k + (t - 1)] += r;
                        }
                    }
                }
            } else {
                gemm(
                    w,
                    rows,
                    k,
                    &self.bar,
                    (1, w),
                    &self.hidden[l - 1],
                    (k, 1),
                    1.0,
                    gw,
                );
                self.bar_next.resize(rows * k, 0.0);
                gemm(
                    rows,
                    w,
                    k,
                    &self.bar,
                    (w, 1),
                    params.hidden_weights(l),
                    (k, 1),
                    0.0,
                    &mut self.bar_next,
                );
                std::mem::swap(&mut self.bar, &mut self.bar_next);
            }
        }
    }
}

#[inline]
fn slope(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Adds the bias to block 0, then scales every block by the slope that block 0
/// selects.
fn activate(h: &mut [f64], bias: &[f64], b: usize, blocks: usize, w: usize) {
    let (head, tail) = h.split_at_mut(b * w);
    for row in head.chunks_exact_mut(w) {
        for (v, bb) in row.iter_mut().zip(bias) {
            *v += bb;
        }
    }
    for blk in tail[..(blocks - 1) * b * w].chunks_exact_mut(b * w) {
        for (t, z) in blk.iter_mut().zip(head.iter()) {
            *t *= slope(*z);
        }
    }
    for v in head.iter_mut() {
        *v *= slope(*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{Dual, Scalar, Tape, Var};
    use crate::net::{init_params, trunk};

    fn points(n: usize, dim: usize) -> Vec<f64> {
        (0..n * dim)
            .map(|i| ((i as f64) * 0.618).sin() * 0.9)
            .collect()
    }

    #[test]
    fn forward_matches_scalar_trunk() {
        let p = init_params(3, 7, 2, 4).unwrap();
        let x = points(5, 3);
        let mut tr = Trace::new(p.shape());
        tr.forward(&p, &x, true);
        let data = p.as_slice();
        for i in 0..5 {
            let xi: [f64; 3] = std::array::from_fn(|k| x[i * 3 + k]);
            let raw = trunk(
                &p.shape(),
                |j| Dual::<f64, 3>::from_f64(data[j]),
                &Dual::seed(xi),
            )
            .unwrap();
            for (c, r) in raw.iter().enumerate() {
                assert!((tr.output(0, i)[c] - r.v).abs() < 1e-14);
                for k in 0..3 {
                    assert!((tr.output(1 + k, i)[c] - r.t[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn backward_matches_tape() {
        let p = init_params(2, 6, 2, 8).unwrap();
        let x = points(4, 2);
        let weights: Vec<f64> = (0..4 * 3 * 3)
            .map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1)
            .collect();
        let mut tr = Trace::new(p.shape());
        tr.forward(&p, &x, true);
        let mut grad = vec![0.0; p.len()];
        tr.backward(&p, &weights, &mut grad);

        let tape = Tape::new();
        let vars: Vec<Var<'_>> = p.as_slice().iter().map(|&v| tape.input(v)).collect();
        let mut acc = Var::constant(0.0);
        for i in 0..4 {
            let xi = Dual::<Var<'_>, 2>::seed_vars([
                Var::constant(x[2 * i]),
                Var::constant(x[2 * i + 1]),
            ]);
            let raw = trunk(&p.shape(), |j| Dual::constant(vars[j]), &xi).unwrap();
            for (c, r) in raw.iter().enumerate() {
                acc = acc + r.v * weights[i * 3 + c];
                for k in 0..2 {
                    acc = acc + r.t[k] * weights[((1 + k) * 4 + i) * 3 + c];
                }
            }
        }
        let adj = tape.gradient(acc).unwrap();
        for (j, v) in vars.iter().enumerate() {
            assert!(
                (adj.wrt(*v) - grad[j]).abs() < 1e-13,
                "param {j}: {} vs {}",
                adj.wrt(*v),
                grad[j]
            );
        }
    }

    #[test]
    fn value_only_pass_agrees_with_tangent_pass() {
        let p = init_params(2, 9, 3, 1).unwrap();
        let x = points(11, 2);
        let mut a = Trace::new(p.shape());
        let mut b = Trace::new(p.shape());
        a.forward(&p, &x, true);
        b.forward(&p, &x, false);
        for i in 0..11 {
            assert_eq!(a.output(0, i), b.output(0, i));
        }
    }
}
