//! Fast marching solvers for the eikonal equation on uniform grids over
//! `[-1,1]^dim`, first and second order.

mod io;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub use io::{read_raw, write_csv, write_raw, GridSidecar};

use crate::field::{grid_points, LevelSetField};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Far,
    Narrow,
    Accepted,
}

/// Values on a uniform grid with `n_per_side` nodes per axis, in the same
/// lexicographic order as [`grid_points`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dim: usize,
    n: usize,
    h: f64,
    origin: f64,
    values: Vec<f64>,
    state: Vec<NodeState>,
    /// Sign of φ per node, 0 when unknown.
    side: Vec<i8>,
    /// Nodes accepted by the march, in order. Seeds are not listed.
    accepted: Vec<usize>,
}

impl GridField {
    /// A grid with all nodes FAR at `+∞`.
    pub fn new(dim: usize, n_per_side: usize, spacing: f64, origin: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!(
                "grid dim must be 1, 2 or 3, got {dim}"
            )));
        }
        if n_per_side < 2 {
            return Err(Error::invalid("n_per_side must be at least 2"));
        }
        if !(spacing > 0.0 && spacing.is_finite() && origin.is_finite()) {
            return Err(Error::invalid("spacing must be positive and finite"));
        }
        let total = n_per_side
            .checked_pow(dim as u32)
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        Ok(GridField {
            dim,
            n: n_per_side,
            h: spacing,
            origin,
            values: vec![f64::INFINITY; total],
            state: vec![NodeState::Far; total],
            side: vec![0; total],
            accepted: Vec::new(),
        })
    }

    /// A fully accepted grid holding `values`.
    pub fn from_values(
        dim: usize,
        n_per_side: usize,
        spacing: f64,
        origin: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if dim > 3 || n_per_side.checked_pow(dim as u32) != Some(values.len()) {
            return Err(Error::invalid(format!(
                "{} values do not fill a {n_per_side}^{dim} grid",
                values.len()
            )));
        }
        let mut g = Self::new(dim, n_per_side, spacing, origin)?;
        g.values = values;
        g.state.fill(NodeState::Accepted);
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_side(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn state(&self, i: usize) -> NodeState {
        self.state[i]
    }

    pub fn acceptance_order(&self) -> &[usize] {
        &self.accepted
    }

    /// True when every node is ACCEPTED.
    pub fn is_complete(&self) -> bool {
        self.state.iter().all(|s| *s == NodeState::Accepted)
    }

    fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    fn index_along(&self, i: usize, axis: usize) -> usize {
        (i / self.stride(axis)) % self.n
    }

    /// Node `i` moved by `step` along `axis`, if inside the grid.
    fn neighbor(&self, i: usize, axis: usize, step: isize) -> Option<usize> {
        let k = self.index_along(i, axis) as isize + step;
        if k < 0 || k >= self.n as isize {
            return None;
        }
        Some((i as isize + step * self.stride(axis) as isize) as usize)
    }

    /// Coordinates of node `i`.
    pub fn node(&self, i: usize, out: &mut [f64]) {
        for (axis, c) in out.iter_mut().enumerate().take(self.dim) {
            *c = self.origin + self.index_along(i, axis) as f64 * self.h;
        }
    }

    /// Central differences inside, second-order one-sided differences at
    /// the boundary. Flat with stride `dim`.
    pub fn gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.len() * self.dim];
        let u = &self.values;
        for i in 0..self.len() {
            for axis in 0..self.dim {
                let d = match (self.neighbor(i, axis, -1), self.neighbor(i, axis, 1)) {
                    (Some(a), Some(b)) => (u[b] - u[a]) / (2.0 * self.h),
                    (None, Some(b)) => {
                        let c = self.neighbor(i, axis, 2).unwrap_or(b);
                        if c == b {
                            (u[b] - u[i]) / self.h
                        } else {
                            (-3.0 * u[i] + 4.0 * u[b] - u[c]) / (2.0 * self.h)
                        }
                    }
                    (Some(a), None) => {
                        let c = self.neighbor(i, axis, -2).unwrap_or(a);
                        if c == a {
                            (u[i] - u[a]) / self.h
                        } else {
                            (3.0 * u[i] - 4.0 * u[a] + u[c]) / (2.0 * self.h)
                        }
                    }
                    (None, None) => 0.0,
                };
                g[i * self.dim + axis] = d;
            }
        }
        g
    }

    /// Multilinear interpolation of `data` (stride `width`, one entry per
    /// node) at `x`. Points outside the grid are clamped to it.
    pub fn interpolate(&self, data: &[f64], width: usize, x: &[f64], out: &mut [f64]) {
        let mut base = 0usize;
        let mut frac = [0.0; 3];
        let mut strides = [0usize; 3];
        for axis in 0..self.dim {
            let t = ((x[axis] - self.origin) / self.h).clamp(0.0, (self.n - 1) as f64);
            let k = (t.floor() as usize).min(self.n - 2);
            frac[axis] = t - k as f64;
            strides[axis] = self.stride(axis);
            base += k * strides[axis];
        }
        out[..width].fill(0.0);
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = base;
            for axis in 0..self.dim {
                if corner >> axis & 1 == 1 {
                    w *= frac[axis];
                    idx += strides[axis];
                } else {
                    w *= 1.0 - frac[axis];
                }
            }
            if w != 0.0 {
                for c in 0..width {
                    out[c] += w * data[idx * width + c];
                }
            }
        }
    }
}

/// Initial band from sampled `φ` values: nodes with a sign change to an axis
/// neighbor get a distance from `1/d² = Σ 1/d_k²` and are ACCEPTED.
///
/// `d_k` is the linearly interpolated crossing along axis `k`, or
/// `|φ|/|∂_k φ|` from finite differences on axes without a crossing.
pub fn band_from_samples(
    dim: usize,
    n_per_side: usize,
    spacing: f64,
    origin: f64,
    phi: &[f64],
) -> Result<GridField> {
    let mut g = GridField::new(dim, n_per_side, spacing, origin)?;
    if phi.len() != g.len() {
        return Err(Error::invalid(format!(
            "expected {} samples, got {}",
            g.len(),
            phi.len()
        )));
    }
    if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
        return Err(Error::non_finite("phi samples", i));
    }
    let mut seeds = 0usize;
    for i in 0..g.len() {
        let p = phi[i];
        g.side[i] = if p > 0.0 {
            1
        } else if p < 0.0 {
            -1
        } else {
            0
        };
        if p == 0.0 {
            g.values[i] = 0.0;
            g.state[i] = NodeState::Accepted;
            seeds += 1;
            continue;
        }
        let mut inv_sq = 0.0;
        let mut crossed = false;
        for axis in 0..dim {
            let mut d_axis = f64::INFINITY;
            let lo = g.neighbor(i, axis, -1);
            let hi = g.neighbor(i, axis, 1);
            for j in [lo, hi].into_iter().flatten() {
                let q = phi[j];
                if q == 0.0 || (q > 0.0) != (p > 0.0) {
                    d_axis = d_axis.min(p / (p - q) * spacing);
                }
            }
            if d_axis.is_finite() {
                crossed = true;
                inv_sq += 1.0 / (d_axis * d_axis);
            } else {
                // no crossing within one cell: extrapolate with the axis slope
                let slope = match (lo, hi) {
                    (Some(a), Some(b)) => (phi[b] - phi[a]) / (2.0 * spacing),
                    (Some(a), None) => (p - phi[a]) / spacing,
                    (None, Some(b)) => (phi[b] - p) / spacing,
                    (None, None) => 0.0,
                };
                inv_sq += slope * slope / (p * p);
            }
        }
        if crossed {
            g.values[i] = if inv_sq.is_finite() {
                1.0 / inv_sq.sqrt()
            } else {
                0.0
            };
            g.state[i] = NodeState::Accepted;
            seeds += 1;
        }
    }
    if seeds == 0 {
        return Err(Error::DegenerateField(
            "phi has no sign change on the grid".into(),
        ));
    }
    Ok(g)
}

fn sample_phi(field: &LevelSetField, n_per_side: usize) -> Result<(Vec<f64>, f64)> {
    let grid = grid_points(field.dim(), n_per_side)?;
    let phi = grid.iter().map(|p| field.eval(p)).collect();
    Ok((phi, grid.spacing().expect("uniform grid")))
}

/// [`band_from_samples`] for `field` sampled on the `n_per_side` grid over
/// `[-1,1]^dim`.
pub fn init_band(field: &LevelSetField, n_per_side: usize) -> Result<GridField> {
    let (phi, h) = sample_phi(field, n_per_side)?;
    band_from_samples(field.dim(), n_per_side, h, -1.0, &phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::invalid(format!("FMM order must be 1 or 2, got {v}"))),
        }
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (value, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One upwind term `c·(u − b)²` and the nearest accepted value `a` it rests on.
#[derive(Clone, Copy)]
struct Term {
    a: f64,
    b: f64,
    c: f64,
}

/// Solves `Σ c_k (u − b_k)² = 1` over the smallest consistent prefix of
/// `terms` sorted by `a`.
fn solve_terms(terms: &mut [Term]) -> f64 {
    terms.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut best = terms[0].b + 1.0 / terms[0].c.sqrt();
    let (mut sc, mut scb, mut scbb) = (0.0, 0.0, 0.0);
    for (m, t) in terms.iter().enumerate() {
        sc += t.c;
        scb += t.c * t.b;
        scbb += t.c * t.b * t.b;
        if m == 0 {
            continue;
        }
        if best <= t.a {
            break;
        }
        let disc = scb * scb - sc * (scbb - 1.0);
        if disc < 0.0 {
            break;
        }
        let u = (scb + disc.sqrt()) / sc;
        if u < t.a {
            break;
        }
        best = u;
    }
    best
}

fn upwind_terms(g: &GridField, i: usize, order: Order, out: &mut Vec<Term>) {
    out.clear();
    let inv_h2 = 1.0 / (g.h * g.h);
    for axis in 0..g.dim {
        let mut pick: Option<(f64, isize)> = None;
        for step in [-1isize, 1] {
            if let Some(j) = g.neighbor(i, axis, step) {
                if g.state[j] == NodeState::Accepted && pick.is_none_or(|(a, _)| g.values[j] < a) {
                    pick = Some((g.values[j], step));
                }
            }
        }
        let Some((a1, step)) = pick else { continue };
        let mut term = Term {
            a: a1,
            b: a1,
            c: inv_h2,
        };
        if order == Order::Second {
            if let Some(k) = g.neighbor(i, axis, 2 * step) {
                // seen from node i, a value across the interface is negative
                let a2 = if g.side[k] * g.side[i] < 0 {
                    -g.values[k]
                } else {
                    g.values[k]
                };
                if g.state[k] == NodeState::Accepted && a2 <= a1 {
                    term.b = (4.0 * a1 - a2) / 3.0;
                    term.c = 9.0 / 4.0 * inv_h2;
                }
            }
        }
        out.push(term);
    }
}

fn tentative(g: &GridField, i: usize, order: Order, scratch: &mut Vec<Term>) -> f64 {
    upwind_terms(g, i, order, scratch);
    let u = solve_terms(scratch);
    if order == Order::Second && !(u.is_finite() && u >= scratch[0].a) {
        return tentative(g, i, Order::First, scratch);
    }
    u
}

/// Marches outward from the ACCEPTED band until every node is ACCEPTED.
/// Values are unsigned distances.
pub fn march(mut g: GridField, order: Order) -> Result<GridField> {
    if !g.state.contains(&NodeState::Accepted) {
        return Err(Error::invalid("march needs at least one ACCEPTED node"));
    }
    let mut heap = BinaryHeap::new();
    let mut scratch = Vec::with_capacity(3);
    let seeds: Vec<usize> = (0..g.len())
        .filter(|&i| g.state[i] == NodeState::Accepted)
        .collect();
    for &s in &seeds {
        update_neighbors(&mut g, s, order, &mut heap, &mut scratch);
    }
    while let Some(Entry(v, i)) = heap.pop() {
        if g.state[i] == NodeState::Accepted || v != g.values[i] {
            continue;
        }
        g.state[i] = NodeState::Accepted;
        g.accepted.push(i);
        update_neighbors(&mut g, i, order, &mut heap, &mut scratch);
    }
    debug_assert!(g.is_complete());
    Ok(g)
}

fn update_neighbors(
    g: &mut GridField,
    i: usize,
    order: Order,
    heap: &mut BinaryHeap<Entry>,
    scratch: &mut Vec<Term>,
) {
    let reach: &[isize] = if order == Order::Second {
        &[-2, -1, 1, 2]
    } else {
        &[-1, 1]
    };
    for axis in 0..g.dim {
        for &step in reach {
            let Some(j) = g.neighbor(i, axis, step) else {
                continue;
            };
            // a two-step neighbor only matters once it is already NARROW
            if g.state[j] == NodeState::Accepted
                || (g.state[j] == NodeState::Far && step.abs() == 2)
            {
                continue;
            }
            let u = tentative(g, j, order, scratch);
            if g.state[j] == NodeState::Far || u < g.values[j] {
                g.values[j] = u;
                g.state[j] = NodeState::Narrow;
                heap.push(Entry(u, j));
            }
        }
    }
}

/// Signed distance to the zero set of `field` on the `n_per_side` grid.
pub fn signed_redistance(
    field: &LevelSetField,
    n_per_side: usize,
    order: Order,
) -> Result<GridField> {
    let (phi, h) = sample_phi(field, n_per_side)?;
    signed_from_samples(field.dim(), n_per_side, h, -1.0, &phi, order)
}

/// [`signed_redistance`] from sampled `φ` values.
pub fn signed_from_samples(
    dim: usize,
    n_per_side: usize,
    spacing: f64,
    origin: f64,
    phi: &[f64],
    order: Order,
) -> Result<GridField> {
    let mut g = march(
        band_from_samples(dim, n_per_side, spacing, origin, phi)?,
        order,
    )?;
    for (v, p) in g.values.iter_mut().zip(phi) {
        if *p < 0.0 {
            *v = -*v;
        } else if *p == 0.0 {
            *v = 0.0;
        }
    }
    Ok(g)
}
