use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{Scalar, Var};

/// A value with `N` tangent directions, for forward-mode input gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S, const N: usize> {
    pub v: S,
    pub t: [S; N],
}

impl<S: Scalar, const N: usize> Dual<S, N> {
    /// A value with zero tangents.
    pub fn constant(v: S) -> Self {
        Dual {
            v,
            t: [S::from_f64(0.0); N],
        }
    }

    fn map_t(self, f: impl Fn(S) -> S) -> [S; N] {
        let mut t = self.t;
        for c in t.iter_mut() {
            *c = f(*c);
        }
        t
    }

    fn chain(self, v: S, d: S) -> Self {
        Dual {
            v,
            t: self.map_t(|c| c * d),
        }
    }
}

impl<const N: usize> Dual<f64, N> {
    /// The identity seed: coordinate `k` has tangent `e_k`.
    pub fn seed(x: [f64; N]) -> [Self; N] {
        std::array::from_fn(|k| {
            let mut t = [0.0; N];
            t[k] = 1.0;
            Dual { v: x[k], t }
        })
    }
}

impl<'t, const N: usize> Dual<Var<'t>, N> {
    /// The identity seed over tape variables (or constants).
    pub fn seed_vars(x: [Var<'t>; N]) -> [Self; N] {
        std::array::from_fn(|k| {
            let mut t = [Var::constant(0.0); N];
            t[k] = Var::constant(1.0);
            Dual { v: x[k], t }
        })
    }
}

impl<S: Scalar, const N: usize> Add for Dual<S, N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual {
            v: self.v + rhs.v,
            t: std::array::from_fn(|k| self.t[k] + rhs.t[k]),
        }
    }
}

impl<S: Scalar, const N: usize> Sub for Dual<S, N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual {
            v: self.v - rhs.v,
            t: std::array::from_fn(|k| self.t[k] - rhs.t[k]),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<S: Scalar, const N: usize> Mul for Dual<S, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual {
            v: self.v * rhs.v,
            t: std::array::from_fn(|k| self.t[k] * rhs.v + self.v * rhs.t[k]),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<S: Scalar, const N: usize> Div for Dual<S, N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let v = self.v / rhs.v;
        Dual {
            v,
            t: std::array::from_fn(|k| (self.t[k] - v * rhs.t[k]) / rhs.v),
        }
    }
}

impl<S: Scalar, const N: usize> Neg for Dual<S, N> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            v: -self.v,
            t: self.map_t(|c| -c),
        }
    }
}

impl<S: Scalar, const N: usize> Add<f64> for Dual<S, N> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        Dual {
            v: self.v + c,
            t: self.t,
        }
    }
}

impl<S: Scalar, const N: usize> Sub<f64> for Dual<S, N> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        Dual {
            v: self.v - c,
            t: self.t,
        }
    }
}

impl<S: Scalar, const N: usize> Mul<f64> for Dual<S, N> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Dual {
            v: self.v * c,
            t: self.map_t(|x| x * c),
        }
    }
}

impl<S: Scalar, const N: usize> Div<f64> for Dual<S, N> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        Dual {
            v: self.v / c,
            t: self.map_t(|x| x / c),
        }
    }
}

impl<S: Scalar, const N: usize> Scalar for Dual<S, N> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(S::from_f64(v))
    }
    fn value(&self) -> f64 {
        self.v.value()
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn tanh(self) -> Self {
        let th = self.v.tanh();
        self.chain(th, -(th * th) + 1.0)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual {
            v: s,
            t: self.map_t(|c| c / (s * 2.0)),
        }
    }
    fn stop_gradient(self) -> Self {
        Dual {
            v: self.v.stop_gradient(),
            t: self.map_t(|c| c.stop_gradient()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<const N: usize>(f: impl Fn([f64; N]) -> f64, x: [f64; N]) -> [f64; N] {
        let h = 1e-6;
        std::array::from_fn(|k| {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            (f(p) - f(m)) / (2.0 * h)
        })
    }

    #[test]
    fn composite_matches_finite_differences() {
        fn f<S: Scalar>(x: &[S; 3]) -> S {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 0.5).sqrt();
            (x[0] * 3.0).tanh() * r / (x[1].exp() + 1.0) - x[2].sin() * x[0].cos()
        }
        let x = [0.3, -0.7, 1.1];
        let got = super::super::grad_input(f, x);
        let want = fd(|p| f(&p), x);
        for k in 0..3 {
            assert!(
                (got[k] - want[k]).abs() < 1e-8,
                "{k}: {} vs {}",
                got[k],
                want[k]
            );
        }
    }

    #[test]
    fn quotient_rule() {
        let [a, b] = Dual::seed([2.0, 5.0]);
        let q = a / b;
        assert_eq!(q.v, 0.4);
        assert!((q.t[0] - 0.2).abs() < 1e-16);
        assert!((q.t[1] + 0.08).abs() < 1e-16);
    }
}
