use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LevelSetField;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Uniform {
        n_per_side: usize,
    },
    Random {
        count: usize,
        seed: u64,
    },
    /// Points supplied by the caller.
    Explicit,
}

/// An ordered set of points in `[-1,1]^dim`, stored flat with stride `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    dim: usize,
    points: Vec<f64>,
    spacing: Option<f64>,
    provenance: Provenance,
}

impl CollocationSet {
    /// Wraps caller-provided points. Fails if a coordinate leaves `[-1,1]`.
    pub fn from_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "point buffer length is not a multiple of dim",
            ));
        }
        if let Some(i) = points.iter().position(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::invalid(format!("coordinate {i} outside [-1, 1]")));
        }
        Ok(CollocationSet {
            dim,
            points,
            spacing: None,
            provenance: Provenance::Explicit,
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

    /// Grid spacing `h`, present for uniform grids only.
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    /// The flat coordinate buffer.
    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::invalid(format!("dim must be 2 or 3, got {dim}")))
    }
}

/// Uniform tensor grid with `n_per_side` nodes per axis, endpoints `±1`
/// included, spacing `2/(n_per_side - 1)`.
///
/// Points are in lexicographic order of the node indices, the first
/// coordinate varying slowest.
pub fn grid_points(dim: usize, n_per_side: usize) -> Result<CollocationSet> {
    check_dim(dim)?;
    if n_per_side < 2 {
        return Err(Error::invalid("n_per_side must be at least 2"));
    }
    let n = n_per_side;
    let coords: Vec<f64> = (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect();
    let total = n.pow(dim as u32);
    let mut points = Vec::with_capacity(total * dim);
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = [0usize; 3];
        for axis in (0..dim).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        points.extend(idx[..dim].iter().map(|&i| coords[i]));
    }
    Ok(CollocationSet {
        dim,
        points,
        spacing: Some(2.0 / (n - 1) as f64),
        provenance: Provenance::Uniform { n_per_side },
    })
}

/// The named preset grid with `2^k` points per side.
pub fn omega(dim: usize, k: u32) -> Result<CollocationSet> {
    if !(1..=16).contains(&k) {
        return Err(Error::invalid(format!(
            "grid preset exponent {k} out of range"
        )));
    }
    grid_points(dim, 1usize << k)
}

/// `count` i.i.d. uniform points on `[-1,1]^dim`, reproducible from `seed`.
pub fn random_points(dim: usize, count: usize, seed: u64) -> Result<CollocationSet> {
    check_dim(dim)?;
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count * dim)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    Ok(CollocationSet {
        dim,
        points,
        spacing: None,
        provenance: Provenance::Random { count, seed },
    })
}

/// `1/√(max φ · max(−φ))` over the given samples.
pub fn normalization_factor(values: &[f64]) -> Result<f64> {
    let pos = values.iter().copied().fold(0.0f64, f64::max);
    let neg = values.iter().map(|v| -v).fold(0.0f64, f64::max);
    if !(pos > 0.0 && neg > 0.0) || !pos.is_finite() || !neg.is_finite() {
        return Err(Error::DegenerateField(format!(
            "phi does not change sign on the probe (max phi = {pos}, max -phi = {neg})"
        )));
    }
    Ok(1.0 / (pos * neg).sqrt())
}

/// Rescales `field` so that `max φ · max(−φ) = 1` over the probe points.
/// The zero set and the sign pattern are unchanged.
pub fn normalize_phi(field: &LevelSetField, probe: &CollocationSet) -> Result<LevelSetField> {
    if probe.dim() != field.dim() {
        return Err(Error::invalid("probe and field dimensions differ"));
    }
    let values: Vec<f64> = probe.iter().map(|p| field.eval(p)).collect();
    Ok(field.scaled(normalization_factor(&values)?))
}
