//! Differentiation engine.
//!
//! Input gradients (`∇ₓ`) are taken in forward mode with [`Dual`] numbers;
//! parameter gradients are taken in reverse mode on a [`Tape`]. The two nest:
//! running a network on `Dual<Var, N>` records the input-gradient computation
//! itself on the tape, so a loss that contains `∇ₓu` can be differentiated with
//! respect to the parameters.
//!
//! This engine is general and scalar-at-a-time. Training uses the batched
//! engine in [`crate::net`], which is checked against this one.

mod dual;
mod tape;

pub use dual::Dual;
pub use tape::{Adjoints, Op, Tape, Var};

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Result;

/// Slope of LeakyReLU on the negative side, also used as its derivative at 0.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Number-like types the network and losses can be evaluated on.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// The primal value.
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    /// Passes the value through and blocks every derivative.
    fn stop_gradient(self) -> Self;

    /// `x` for `x > 0`, `0.01 x` otherwise (so the derivative at 0 is 0.01).
    fn leaky_relu(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            self * LEAKY_SLOPE
        }
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn stop_gradient(self) -> Self {
        self
    }
}

/// Free-function form of [`Scalar::stop_gradient`].
pub fn stop_gradient<S: Scalar>(value: S) -> S {
    value.stop_gradient()
}

/// Euclidean norm of a slice of scalars.
pub fn norm<S: Scalar>(v: &[S]) -> S {
    let mut acc = S::from_f64(0.0);
    for &c in v {
        acc = acc + c * c;
    }
    acc.sqrt()
}

/// Exact gradient of a scalar map at `x`, by forward mode.
pub fn grad_input<const N: usize, F>(f: F, x: [f64; N]) -> [f64; N]
where
    F: Fn(&[Dual<f64, N>; N]) -> Dual<f64, N>,
{
    let seeded = Dual::<f64, N>::seed(x);
    f(&seeded).t
}

/// Gradient of `loss` with respect to every entry of `params`, by reverse
/// mode. `loss` may itself use [`Dual`] numbers over the tape variables.
pub fn grad_params<F>(loss: F, params: &[f64]) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|&p| tape.input(p)).collect();
    let out = loss(&vars);
    let adjoints = tape.gradient(out)?;
    Ok(vars.iter().map(|v| adjoints.wrt(*v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_gradient() {
        let g = grad_input(|x| x[0] + x[1] * 2.0, [0.3, -4.0]);
        assert_eq!(g, [1.0, 2.0]);
    }

    #[test]
    fn norm_gradient_is_radial() {
        let g = grad_input(|x| norm(x), [3.0, 4.0]);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn half_squared_norm_gradient_is_identity() {
        let theta = [0.5, -1.25, 3.0, 0.0];
        let g = grad_params(
            |p| {
                let mut acc = Var::constant(0.0);
                for &v in p {
                    acc = acc + v * v;
                }
                acc * 0.5
            },
            &theta,
        )
        .unwrap();
        assert_eq!(g, theta);
    }

    #[test]
    fn stop_gradient_freezes_a_factor() {
        let g = grad_params(|p| stop_gradient(p[0]) * p[0], &[3.0]).unwrap();
        assert_eq!(g, vec![3.0]);
        let g = grad_params(|p| stop_gradient((p[0] * p[1]).sin()), &[0.4, 2.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn nested_forward_in_reverse_matches_closed_form() {
        // f(x; a, b) = a sin(b x); ∂f/∂x = a b cos(b x)
        // L = (∂f/∂x)² ⇒ ∂L/∂a = 2 a (b cos bx)², ∂L/∂b = 2 (a b cos bx) a (cos bx - b x sin bx)
        let (a, b, x) = (0.7, 1.3, 0.4);
        let g = grad_params(
            |p| {
                let xs = Dual::<Var<'_>, 1>::seed_vars([Var::constant(x)]);
                let a = Dual::constant(p[0]);
                let b = Dual::constant(p[1]);
                let f = a * (b * xs[0]).sin();
                f.t[0] * f.t[0]
            },
            &[a, b],
        )
        .unwrap();
        let d = a * b * (b * x).cos();
        let da = 2.0 * d * b * (b * x).cos();
        let db = 2.0 * d * a * ((b * x).cos() - b * x * (b * x).sin());
        assert!((g[0] - da).abs() < 1e-14);
        assert!((g[1] - db).abs() < 1e-14);
    }

    #[test]
    fn leaky_relu_kink_uses_left_slope() {
        let g = grad_input(|x| x[0].leaky_relu(), [0.0]);
        assert_eq!(g, [LEAKY_SLOPE]);
        let g = grad_input(|x| x[0].leaky_relu(), [1e-300]);
        assert_eq!(g, [1.0]);
    }
}
