use std::f64::consts::PI;

use super::norm;
use crate::{Error, Result};

/// Prefactor of the heart-shaped field. Both variants are strictly positive,
/// so the zero set is that of the second factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeartPrefactor {
    /// `cos(x + y) + 2(x + y)² + 3/2`
    CosSum,
    /// `cos(πx)cos(πy) + 2(x + y)² + 3/2`
    CosProduct,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    /// `‖x‖ - r`, the plain cone.
    Cone { radius: f64 },
    /// `e^{x+y}(‖x‖ - r)`
    ExpCircle { radius: f64 },
    /// `(1.2 sin(4πx) sin(4πy) + 2) e^{-(x²+y²)/2} (‖x‖ - r)`
    OscCircle { radius: f64 },
    /// `x² + 3/2 y²` outside the circle, `(c - r0)² - r0²` inside, `c = ‖x‖ - r`.
    JumpCircle { radius: f64, r0: f64 },
    /// `½ max(|x| - s/2, |y| - s/2)`
    Square { side: f64 },
    /// `(0.5 sin(6πx) sin(6πy) + 1)(5ρ - 2 - α cos 5θ)`
    Flower { alpha: f64 },
    /// `10x⁴(2x² - 1) + y² - 1/10`
    Dumbbell,
    /// `P(x, y) (2.2 (y + 0.2 - x^{2/3})² + 1.7x² - 0.6)`
    Heart { prefactor: HeartPrefactor },
    /// `[e^{x+y}] min_j ((x - x_j)² + (y - y_j)² - r_j²)`, members `(x_j, y_j, r_j)`.
    CircleUnion {
        circles: Vec<[f64; 3]>,
        exp_weight: bool,
    },
    /// `((x-1)² + (y-1)² + (z+1)² + 0.1)(‖x‖² - r²)`
    Sphere { radius: f64 },
    /// `min_j 10(x - x_j)² + 5(y - y_j)² + (z - z_j)² - 1`
    EllipsoidUnion { centers: Vec<[f64; 3]> },
}

/// A named analytic level set function `phi` with an optional exact signed
/// distance oracle.
///
/// `scale` multiplies every evaluation; it is 1 for catalog fields and is
/// changed only by [`normalize_phi`](super::normalize_phi).
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetField {
    name: String,
    dim: usize,
    kind: FieldKind,
    scale: f64,
}

const CATALOG: &[&str] = &[
    "circle",
    "phi1",
    "phi_osc",
    "phi_jump",
    "phi4_square",
    "phi5_flower(alpha)",
    "phi6_dumbbell",
    "phi7_heart",
    "phi8_twocircle",
    "phi9_threecircle",
    "phi10_sphere",
    "phi11_ellipsoids",
];

/// Stable catalog identifiers, with `phi5_flower` shown in its parameterized form.
pub fn catalog_names() -> Vec<String> {
    CATALOG.iter().map(|s| s.to_string()).collect()
}

fn not_found(name: &str) -> Error {
    Error::NotFound {
        name: name.to_string(),
        valid: catalog_names(),
    }
}

/// Looks up a catalog field by identifier.
///
/// Besides the stable identifiers this accepts the short aliases `phi2`
/// (the piecewise formula), `phi3` (the sin-modulated formula), `phi4` ...
/// `phi11`, and an optional parameter in parentheses for the flower
/// (`phi5_flower(1)`) and the heart (`phi7_heart(product)`).
pub fn catalog_get(name: &str) -> Result<LevelSetField> {
    let trimmed = name.trim();
    let (base, arg) = match trimmed.find('(') {
        Some(open) => {
            let close = trimmed
                .strip_suffix(')')
                .ok_or_else(|| not_found(trimmed))?;
            (&trimmed[..open], Some(close[open + 1..].trim()))
        }
        None => (trimmed, None),
    };
    let no_arg = |field: LevelSetField| match arg {
        None => Ok(field),
        Some(_) => Err(not_found(trimmed)),
    };
    let kind = |kind: FieldKind, dim: usize| LevelSetField::new(base, dim, kind);
    match base {
        "circle" | "cone" => no_arg(kind(FieldKind::Cone { radius: 0.5 }, 2)),
        "phi1" => no_arg(kind(FieldKind::ExpCircle { radius: 0.5 }, 2)),
        "phi_osc" | "phi3" => no_arg(kind(FieldKind::OscCircle { radius: 0.5 }, 2)),
        "phi_jump" | "phi2" => no_arg(kind(
            FieldKind::JumpCircle {
                radius: 0.5,
                r0: DEFAULT_JUMP_R0,
            },
            2,
        )),
        "phi4_square" | "phi4" => no_arg(kind(FieldKind::Square { side: 1.0 }, 2)),
        "phi5_flower" | "phi5" => {
            let alpha = match arg {
                None => 0.5,
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|a| a.is_finite())
                    .ok_or_else(|| not_found(trimmed))?,
            };
            Ok(kind(FieldKind::Flower { alpha }, 2))
        }
        "phi6_dumbbell" | "phi6" => no_arg(kind(FieldKind::Dumbbell, 2)),
        "phi7_heart" | "phi7" => {
            let prefactor = match arg {
                None | Some("sum") => HeartPrefactor::CosSum,
                Some("product") => HeartPrefactor::CosProduct,
                Some(_) => return Err(not_found(trimmed)),
            };
            Ok(kind(FieldKind::Heart { prefactor }, 2))
        }
        "phi8_twocircle" | "phi8" => no_arg(kind(
            FieldKind::CircleUnion {
                circles: vec![[-0.2, 0.0, 0.3], [-0.2, 0.0, 0.3]],
                exp_weight: true,
            },
            2,
        )),
        "phi9_threecircle" | "phi9" => no_arg(kind(
            FieldKind::CircleUnion {
                circles: vec![[-0.4, 0.3, 0.45], [0.5, 0.3, 0.3], [0.3, -0.5, 0.4]],
                exp_weight: true,
            },
            2,
        )),
        "phi10_sphere" | "phi10" => no_arg(kind(FieldKind::Sphere { radius: 0.5 }, 3)),
        "phi11_ellipsoids" | "phi11" => no_arg(kind(
            FieldKind::EllipsoidUnion {
                centers: vec![[-0.2, 0.0, 0.0], [0.2, 0.0, 0.0]],
            },
            3,
        )),
        _ => Err(not_found(trimmed)),
    }
}

/// `r0` of the piecewise field. The printed formula `(c - r0)² - r0²` is
/// non-negative inside the circle for any `r0 ≥ 0`, so a negative value is
/// needed for the interior to be negative; `-0.3` keeps the interior minimum
/// at `c = -0.3` and avoids a second zero at the center.
pub const DEFAULT_JUMP_R0: f64 = -0.3;

#[inline]
fn radial(x: &[f64]) -> f64 {
    norm(x)
}

/// `x / ‖x‖`, with the zero vector at the origin.
#[inline]
fn unit_or_zero(x: &[f64], out: &mut [f64]) {
    let r = radial(x);
    for (o, a) in out.iter_mut().zip(x) {
        *o = if r > 0.0 { a / r } else { 0.0 };
    }
}

impl LevelSetField {
    pub fn new(name: impl Into<String>, dim: usize, kind: FieldKind) -> Self {
        LevelSetField {
            name: name.into(),
            dim,
            kind,
            scale: 1.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same field with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        LevelSetField {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    /// Named constants of the formula.
    pub fn params(&self) -> Vec<(String, f64)> {
        let mut p: Vec<(String, f64)> = match &self.kind {
            FieldKind::Cone { radius }
            | FieldKind::ExpCircle { radius }
            | FieldKind::OscCircle { radius }
            | FieldKind::Sphere { radius } => vec![("r".into(), *radius)],
            FieldKind::JumpCircle { radius, r0 } => {
                vec![("r".into(), *radius), ("r0".into(), *r0)]
            }
            FieldKind::Square { side } => vec![("r".into(), *side)],
            FieldKind::Flower { alpha } => vec![("alpha".into(), *alpha)],
            FieldKind::Dumbbell => vec![],
            FieldKind::Heart { prefactor } => vec![(
                "cos_product".into(),
                (*prefactor == HeartPrefactor::CosProduct) as u8 as f64,
            )],
            FieldKind::CircleUnion { circles, .. } => circles
                .iter()
                .enumerate()
                .flat_map(|(j, c)| {
                    let j = j + 1;
                    [
                        (format!("x{j}"), c[0]),
                        (format!("y{j}"), c[1]),
                        (format!("r{j}"), c[2]),
                    ]
                })
                .collect(),
            FieldKind::EllipsoidUnion { centers } => centers
                .iter()
                .enumerate()
                .flat_map(|(j, c)| {
                    let j = j + 1;
                    [
                        (format!("x{j}"), c[0]),
                        (format!("y{j}"), c[1]),
                        (format!("z{j}"), c[2]),
                    ]
                })
                .collect(),
        };
        p.push(("scale".into(), self.scale));
        p
    }

    pub fn has_exact_sdf(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::Cone { .. }
                | FieldKind::ExpCircle { .. }
                | FieldKind::OscCircle { .. }
                | FieldKind::JumpCircle { .. }
                | FieldKind::Square { .. }
                | FieldKind::CircleUnion { .. }
                | FieldKind::Sphere { .. }
        )
    }

    /// `phi(x)` including the normalization scale.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.scale * self.eval_raw(x)
    }

    /// `∇phi(x)` including the normalization scale, written into `out`.
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.grad_raw(x, out);
        for o in out.iter_mut() {
            *o *= self.scale;
        }
    }

    fn eval_raw(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FieldKind::Cone { radius } => radial(x) - radius,
            FieldKind::ExpCircle { radius } => (x[0] + x[1]).exp() * (radial(x) - radius),
            FieldKind::OscCircle { radius } => {
                let (px, py) = (x[0], x[1]);
                let modulation = 1.2 * (4.0 * PI * px).sin() * (4.0 * PI * py).sin() + 2.0;
                let r2 = px * px + py * py;
                modulation * (-r2 / 2.0).exp() * (radial(x) - radius)
            }
            FieldKind::JumpCircle { radius, r0 } => {
                let c = radial(x) - radius;
                if c > 0.0 {
                    x[0] * x[0] + 1.5 * x[1] * x[1]
                } else {
                    (c - r0) * (c - r0) - r0 * r0
                }
            }
            FieldKind::Square { side } => {
                0.5 * (x[0].abs() - side / 2.0).max(x[1].abs() - side / 2.0)
            }
            FieldKind::Flower { alpha } => {
                let (px, py) = (x[0], x[1]);
                let modulation = 0.5 * (6.0 * PI * px).sin() * (6.0 * PI * py).sin() + 1.0;
                let theta = py.atan2(px);
                modulation * (5.0 * radial(x) - 2.0 - alpha * (5.0 * theta).cos())
            }
            FieldKind::Dumbbell => {
                let (px, py) = (x[0], x[1]);
                10.0 * px.powi(4) * (2.0 * px * px - 1.0) + py * py - 0.1
            }
            FieldKind::Heart { prefactor } => {
                let (px, py) = (x[0], x[1]);
                let k = (px * px).cbrt();
                let shape = 2.2 * (py + 0.2 - k).powi(2) + 1.7 * px * px - 0.6;
                heart_prefactor(*prefactor, px, py).0 * shape
            }
            FieldKind::CircleUnion {
                circles,
                exp_weight,
            } => {
                let (m, _) = circle_union_min(circles, x);
                if *exp_weight {
                    (x[0] + x[1]).exp() * m
                } else {
                    m
                }
            }
            FieldKind::Sphere { radius } => {
                let q = (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2) + (x[2] + 1.0).powi(2) + 0.1;
                q * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - radius * radius)
            }
            FieldKind::EllipsoidUnion { centers } => ellipsoid_union_min(centers, x).0,
        }
    }

    fn grad_raw(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Cone { .. } => unit_or_zero(x, out),
            FieldKind::ExpCircle { radius } => {
                let e = (x[0] + x[1]).exp();
                let c = radial(x) - radius;
                let mut n = [0.0; 2];
                unit_or_zero(x, &mut n);
                out[0] = e * (c + n[0]);
                out[1] = e * (c + n[1]);
            }
            FieldKind::OscCircle { radius } => {
                let (px, py) = (x[0], x[1]);
                let w = 4.0 * PI;
                let (sx, cx) = (w * px).sin_cos();
                let (sy, cy) = (w * py).sin_cos();
                let modulation = 1.2 * sx * sy + 2.0;
                let dm = [1.2 * w * cx * sy, 1.2 * w * sx * cy];
                let g = (-(px * px + py * py) / 2.0).exp();
                let c = radial(x) - radius;
                let mut n = [0.0; 2];
                unit_or_zero(x, &mut n);
                for k in 0..2 {
                    out[k] = dm[k] * g * c - modulation * x[k] * g * c + modulation * g * n[k];
                }
            }
            FieldKind::JumpCircle { radius, r0 } => {
                let c = radial(x) - radius;
                if c > 0.0 {
                    out[0] = 2.0 * x[0];
                    out[1] = 3.0 * x[1];
                } else {
                    unit_or_zero(x, out);
                    let f = 2.0 * (c - r0);
                    out[0] *= f;
                    out[1] *= f;
                }
            }
            FieldKind::Square { side } => {
                let a = side / 2.0;
                out[0] = 0.0;
                out[1] = 0.0;
                if x[0].abs() - a >= x[1].abs() - a {
                    out[0] = 0.5 * signum0(x[0]);
                } else {
                    out[1] = 0.5 * signum0(x[1]);
                }
            }
            FieldKind::Flower { alpha } => {
                let (px, py) = (x[0], x[1]);
                let w = 6.0 * PI;
                let (sx, cx) = (w * px).sin_cos();
                let (sy, cy) = (w * py).sin_cos();
                let modulation = 0.5 * sx * sy + 1.0;
                let dm = [0.5 * w * cx * sy, 0.5 * w * sx * cy];
                let r = radial(x);
                let theta = py.atan2(px);
                let petals = 5.0 * r - 2.0 - alpha * (5.0 * theta).cos();
                // d/dx of -α cos 5θ = 5α sin 5θ ∂θ/∂x, ∂θ/∂x = -y/r², ∂θ/∂y = x/r²
                let dpetals = if r > 0.0 {
                    let s = 5.0 * alpha * (5.0 * theta).sin() / (r * r);
                    [5.0 * px / r - s * py, 5.0 * py / r + s * px]
                } else {
                    [0.0, 0.0]
                };
                for k in 0..2 {
                    out[k] = dm[k] * petals + modulation * dpetals[k];
                }
            }
            FieldKind::Dumbbell => {
                let (px, py) = (x[0], x[1]);
                out[0] = 120.0 * px.powi(5) - 40.0 * px.powi(3);
                out[1] = 2.0 * py;
            }
            FieldKind::Heart { prefactor } => {
                let (px, py) = (x[0], x[1]);
                let k = (px * px).cbrt();
                // d/dx |x|^{2/3} = (2/3) k / x; taken as 0 at the cusp x = 0
                let dk = if px != 0.0 { 2.0 / 3.0 * k / px } else { 0.0 };
                let t = py + 0.2 - k;
                let shape = 2.2 * t * t + 1.7 * px * px - 0.6;
                let dshape = [-4.4 * t * dk + 3.4 * px, 4.4 * t];
                let (p, dp) = heart_prefactor(*prefactor, px, py);
                for k in 0..2 {
                    out[k] = dp[k] * shape + p * dshape[k];
                }
            }
            FieldKind::CircleUnion {
                circles,
                exp_weight,
            } => {
                let (m, j) = circle_union_min(circles, x);
                let c = circles[j];
                let dm = [2.0 * (x[0] - c[0]), 2.0 * (x[1] - c[1])];
                if *exp_weight {
                    let e = (x[0] + x[1]).exp();
                    out[0] = e * (m + dm[0]);
                    out[1] = e * (m + dm[1]);
                } else {
                    out[..2].copy_from_slice(&dm);
                }
            }
            FieldKind::Sphere { radius } => {
                let q = (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2) + (x[2] + 1.0).powi(2) + 0.1;
                let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - radius * radius;
                let shift = [-1.0, -1.0, 1.0];
                for k in 0..3 {
                    out[k] = 2.0 * (x[k] + shift[k]) * s + q * 2.0 * x[k];
                }
            }
            FieldKind::EllipsoidUnion { centers } => {
                let (_, j) = ellipsoid_union_min(centers, x);
                let c = centers[j];
                out[0] = 20.0 * (x[0] - c[0]);
                out[1] = 10.0 * (x[1] - c[1]);
                out[2] = 2.0 * (x[2] - c[2]);
            }
        }
    }

    /// Exact signed distance to the zero set, when a closed form exists.
    ///
    /// For circle unions this is the minimum of the member distances, which is
    /// exact when the members do not partially overlap (true for the catalog
    /// constants).
    pub fn exact_sdf(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            FieldKind::Cone { radius }
            | FieldKind::ExpCircle { radius }
            | FieldKind::OscCircle { radius }
            | FieldKind::JumpCircle { radius, .. }
            | FieldKind::Sphere { radius } => Some(radial(x) - radius),
            FieldKind::Square { side } => Some(exact_sdf_square(x, *side)),
            FieldKind::CircleUnion { circles, .. } => Some(
                circles
                    .iter()
                    .map(|c| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() - c[2])
                    .fold(f64::INFINITY, f64::min),
            ),
            _ => None,
        }
    }

    /// Gradient of [`exact_sdf`](Self::exact_sdf), i.e. the exact outward unit
    /// normal field. Returns `false` when no closed form exists. At singular
    /// points (cone apex) the zero vector is written.
    pub fn exact_sdf_grad(&self, x: &[f64], out: &mut [f64]) -> bool {
        match &self.kind {
            FieldKind::Cone { .. }
            | FieldKind::ExpCircle { .. }
            | FieldKind::OscCircle { .. }
            | FieldKind::JumpCircle { .. }
            | FieldKind::Sphere { .. } => {
                unit_or_zero(x, out);
                true
            }
            FieldKind::Square { side } => {
                square_sdf_grad(x, *side, out);
                true
            }
            FieldKind::CircleUnion { circles, .. } => {
                let j = circles
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        (
                            j,
                            ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() - c[2],
                        )
                    })
                    .fold(
                        (0, f64::INFINITY),
                        |best, cur| if cur.1 < best.1 { cur } else { best },
                    )
                    .0;
                let c = circles[j];
                unit_or_zero(&[x[0] - c[0], x[1] - c[1]], out);
                true
            }
            _ => false,
        }
    }
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn heart_prefactor(kind: HeartPrefactor, x: f64, y: f64) -> (f64, [f64; 2]) {
    let s = x + y;
    match kind {
        HeartPrefactor::CosSum => {
            let d = -s.sin() + 4.0 * s;
            (s.cos() + 2.0 * s * s + 1.5, [d, d])
        }
        HeartPrefactor::CosProduct => {
            let (sx, cx) = (PI * x).sin_cos();
            let (sy, cy) = (PI * y).sin_cos();
            (
                cx * cy + 2.0 * s * s + 1.5,
                [-PI * sx * cy + 4.0 * s, -PI * cx * sy + 4.0 * s],
            )
        }
    }
}

fn circle_union_min(circles: &[[f64; 3]], x: &[f64]) -> (f64, usize) {
    circles
        .iter()
        .enumerate()
        .map(|(j, c)| {
            (
                (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) - c[2] * c[2],
                j,
            )
        })
        .fold(
            (f64::INFINITY, 0),
            |best, cur| if cur.0 < best.0 { cur } else { best },
        )
}

fn ellipsoid_union_min(centers: &[[f64; 3]], x: &[f64]) -> (f64, usize) {
    centers
        .iter()
        .enumerate()
        .map(|(j, c)| {
            (
                10.0 * (x[0] - c[0]).powi(2) + 5.0 * (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)
                    - 1.0,
                j,
            )
        })
        .fold(
            (f64::INFINITY, 0),
            |best, cur| if cur.0 < best.0 { cur } else { best },
        )
}

/// Signed distance to the boundary of the axis-aligned square of side `side`
/// centered at the origin. Outside the corners the distance is to the corner
/// point, so the level sets are rounded there.
pub fn exact_sdf_square(x: &[f64], side: f64) -> f64 {
    let a = side / 2.0;
    let qx = x[0].abs() - a;
    let qy = x[1].abs() - a;
    let outside = (qx.max(0.0).powi(2) + qy.max(0.0).powi(2)).sqrt();
    let inside = qx.max(qy).min(0.0);
    outside + inside
}

fn square_sdf_grad(x: &[f64], side: f64, out: &mut [f64]) {
    let a = side / 2.0;
    let qx = x[0].abs() - a;
    let qy = x[1].abs() - a;
    let (sx, sy) = (signum0(x[0]), signum0(x[1]));
    if qx > 0.0 || qy > 0.0 {
        let (ox, oy) = (qx.max(0.0), qy.max(0.0));
        let r = (ox * ox + oy * oy).sqrt();
        out[0] = sx * ox / r;
        out[1] = sy * oy / r;
    } else if qx >= qy {
        out[0] = sx;
        out[1] = 0.0;
    } else {
        out[0] = 0.0;
        out[1] = sy;
    }
}
