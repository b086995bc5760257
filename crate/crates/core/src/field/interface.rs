use super::{norm, LevelSetField};
use crate::{Error, Result};

/// Bisection steps applied to every detected zero crossing.
pub const BISECTION_STEPS: usize = 60;

/// Default number of interface points for the point-cloud distance oracle.
pub const DEFAULT_CLOUD_SIZE: usize = 7000;

/// Points on the interface, optionally with outward unit normals.
#[derive(Clone, Debug)]
pub struct InterfaceSample {
    dim: usize,
    points: Vec<f64>,
    normals: Option<Vec<f64>>,
}

impl InterfaceSample {
    pub fn new(dim: usize, points: Vec<f64>, normals: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "point buffer length is not a multiple of dim",
            ));
        }
        if let Some(n) = &normals {
            if n.len() != points.len() {
                return Err(Error::invalid("normals and points differ in length"));
            }
        }
        Ok(InterfaceSample {
            dim,
            points,
            normals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        self.normals
            .as_ref()
            .map(|n| &n[i * self.dim..(i + 1) * self.dim])
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }
}

/// Scan grid resolution for [`sample_interface_with`]. The scan starts at
/// `start` nodes per side and doubles until enough crossings are found or
/// `max` is reached.
#[derive(Clone, Copy, Debug)]
pub struct ScanResolution {
    pub start: usize,
    pub max: usize,
}

impl ScanResolution {
    pub fn default_for(dim: usize) -> Self {
        if dim == 2 {
            ScanResolution {
                start: 1024,
                max: 8192,
            }
        } else {
            ScanResolution {
                start: 128,
                max: 256,
            }
        }
    }
}

/// Samples `Γ` by detecting sign changes along the edges of a fine scan grid
/// over `[-1,1]^dim` and bisecting each crossing [`BISECTION_STEPS`] times.
///
/// At least `target_count / 2` points are returned whenever the finest scan
/// finds that many; more than `target_count` crossings are thinned by uniform
/// stride. Normals come from the exact distance gradient when one exists and
/// from `∇φ/|∇φ|` otherwise.
pub fn sample_interface(field: &LevelSetField, target_count: usize) -> Result<InterfaceSample> {
    sample_interface_with(
        field,
        target_count,
        ScanResolution::default_for(field.dim()),
    )
}

pub fn sample_interface_with(
    field: &LevelSetField,
    target_count: usize,
    resolution: ScanResolution,
) -> Result<InterfaceSample> {
    let dim = field.dim();
    let mut n = resolution.start.max(2);
    let mut points = loop {
        let found = scan_crossings(field, n);
        if found.len() / dim >= target_count / 2 || n * 2 > resolution.max {
            break found;
        }
        n *= 2;
    };
    if points.is_empty() {
        return Err(Error::DegenerateField(format!(
            "no zero crossing of `{}` on a {n}-per-side scan grid",
            field.name()
        )));
    }
    let found = points.len() / dim;
    if target_count > 0 && found > target_count {
        let mut thinned = Vec::with_capacity(target_count * dim);
        for i in 0..target_count {
            let j = i * found / target_count;
            thinned.extend_from_slice(&points[j * dim..(j + 1) * dim]);
        }
        points = thinned;
    }

    let mut normals = vec![0.0; points.len()];
    for (p, nrm) in points.chunks_exact(dim).zip(normals.chunks_exact_mut(dim)) {
        if !field.exact_sdf_grad(p, nrm) {
            field.grad(p, nrm);
            let len = norm(nrm);
            if len > 0.0 {
                nrm.iter_mut().for_each(|c| *c /= len);
            }
        }
    }
    InterfaceSample::new(dim, points, Some(normals))
}

fn scan_crossings(field: &LevelSetField, n: usize) -> Vec<f64> {
    let dim = field.dim();
    let h = 2.0 / (n - 1) as f64;
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    let total = n.pow(dim as u32);
    let mut idx = vec![0usize; dim];
    let mut p = vec![0.0; dim];
    let mut values = Vec::with_capacity(total);
    for flat in 0..total {
        unflatten(flat, n, &mut idx);
        for (c, &i) in p.iter_mut().zip(&idx) {
            *c = coord(i);
        }
        values.push(field.eval(&p));
    }

    let mut out = Vec::new();
    for flat in 0..total {
        unflatten(flat, n, &mut idx);
        for (c, &i) in p.iter_mut().zip(&idx) {
            *c = coord(i);
        }
        let fa = values[flat];
        if fa == 0.0 {
            out.extend_from_slice(&p);
            continue;
        }
        for axis in 0..dim {
            if idx[axis] + 1 >= n {
                continue;
            }
            let stride = n.pow((dim - 1 - axis) as u32);
            let fb = values[flat + stride];
            if fb == 0.0 || fa.signum() == fb.signum() {
                continue;
            }
            let mut q = p.clone();
            bisect_along(field, &mut q, axis, p[axis], p[axis] + h, fa);
            out.extend_from_slice(&q);
        }
    }
    out
}

fn unflatten(mut flat: usize, n: usize, idx: &mut [usize]) {
    for axis in (0..idx.len()).rev() {
        idx[axis] = flat % n;
        flat /= n;
    }
}

/// Bisects `phi` along `axis` on `[lo, hi]` where `phi(lo)` has the sign of
/// `f_lo`, leaving in `q` the end with the smaller `|phi|`.
fn bisect_along(field: &LevelSetField, q: &mut [f64], axis: usize, lo: f64, hi: f64, f_lo: f64) {
    let (mut lo, mut hi) = (lo, hi);
    let mut f_at_lo = f_lo;
    let mut f_at_hi = f64::NAN;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        q[axis] = mid;
        let f = field.eval(q);
        if f == 0.0 {
            return;
        }
        if f.signum() == f_lo.signum() {
            lo = mid;
            f_at_lo = f;
        } else {
            hi = mid;
            f_at_hi = f;
        }
    }
    if f_at_hi.is_nan() {
        q[axis] = hi;
        f_at_hi = field.eval(q);
    }
    q[axis] = if f_at_lo.abs() <= f_at_hi.abs() {
        lo
    } else {
        hi
    };
}

/// Nearest-point queries against a finite interface sample.
#[derive(Clone, Debug)]
pub struct PointCloudOracle {
    dim: usize,
    points: Vec<f64>,
}

impl PointCloudOracle {
    pub fn new(cloud: &InterfaceSample) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::invalid("point cloud is empty"));
        }
        Ok(PointCloudOracle {
            dim: cloud.dim(),
            points: cloud.as_flat().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(distance, index)` of the nearest cloud point.
    pub fn nearest(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (j, p) in self.points.chunks_exact(self.dim).enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 {
                best = (d2, j);
            }
        }
        (best.0.sqrt(), best.1)
    }

    /// `sign(φ(x)) · min_p ‖x − p‖`.
    pub fn sdf(&self, field: &LevelSetField, x: &[f64]) -> f64 {
        let phi = field.eval(x);
        if phi == 0.0 {
            return 0.0;
        }
        phi.signum() * self.nearest(x).0
    }

    /// Signed distance plus the unit direction away from the nearest cloud
    /// point (the approximate outward normal field); zero vector on the cloud.
    pub fn sdf_and_direction(&self, field: &LevelSetField, x: &[f64], dir: &mut [f64]) -> f64 {
        let (d, j) = self.nearest(x);
        let s = field.eval(x).signum();
        let p = &self.points[j * self.dim..(j + 1) * self.dim];
        for k in 0..self.dim {
            dir[k] = if d > 0.0 { s * (x[k] - p[k]) / d } else { 0.0 };
        }
        if field.eval(x) == 0.0 {
            0.0
        } else {
            s * d
        }
    }
}

/// One-off point-cloud distance query; see [`PointCloudOracle::sdf`].
pub fn approx_sdf_pointcloud(
    field: &LevelSetField,
    x: &[f64],
    cloud: &InterfaceSample,
) -> Result<f64> {
    Ok(PointCloudOracle::new(cloud)?.sdf(field, x))
}
