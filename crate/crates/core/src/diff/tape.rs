use std::cell::RefCell;
use std::fmt;
use std::io::Write;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;
use crate::{Error, Result};

/// A recorded primitive. Variants carrying an `f64` hold a constant operand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddC(f64),
    MulC(f64),
    /// `c − a`
    SubFromC(f64),
    /// `a / c`
    DivByC(f64),
    /// `c / a`
    DivIntoC(f64),
    Exp,
    Tanh,
    Sin,
    Cos,
    Sqrt,
    StopGradient,
}

impl Op {
    fn arity(self) -> usize {
        match self {
            Op::Input | Op::Const => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Const => "const",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::AddC(_) => "add_c",
            Op::MulC(_) => "mul_c",
            Op::SubFromC(_) => "sub_from_c",
            Op::DivByC(_) => "div_by_c",
            Op::DivIntoC(_) => "div_into_c",
            Op::Exp => "exp",
            Op::Tanh => "tanh",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Sqrt => "sqrt",
            Op::StopGradient => "stop_gradient",
        }
    }

    /// Value and local partials. Forward recording and replay both go
    /// through here, which is what makes replay bit-exact.
    fn apply(self, a: f64, b: f64) -> (f64, [f64; 2]) {
        match self {
            Op::Input | Op::Const => unreachable!("leaf nodes are not applied"),
            Op::Add => (a + b, [1.0, 1.0]),
            Op::Sub => (a - b, [1.0, -1.0]),
            Op::Mul => (a * b, [b, a]),
            Op::Div => {
                let v = a / b;
                (v, [1.0 / b, -v / b])
            }
            Op::Neg => (-a, [-1.0, 0.0]),
            Op::AddC(c) => (a + c, [1.0, 0.0]),
            Op::MulC(c) => (a * c, [c, 0.0]),
            Op::SubFromC(c) => (c - a, [-1.0, 0.0]),
            Op::DivByC(c) => (a / c, [1.0 / c, 0.0]),
            Op::DivIntoC(c) => {
                let v = c / a;
                (v, [-v / a, 0.0])
            }
            Op::Exp => {
                let e = a.exp();
                (e, [e, 0.0])
            }
            Op::Tanh => {
                let t = a.tanh();
                (t, [1.0 - t * t, 0.0])
            }
            Op::Sin => (a.sin(), [a.cos(), 0.0]),
            Op::Cos => (a.cos(), [-a.sin(), 0.0]),
            Op::Sqrt => {
                let s = a.sqrt();
                (s, [0.5 / s, 0.0])
            }
            Op::StopGradient => (a, [0.0, 0.0]),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    args: [usize; 2],
    partials: [f64; 2],
    value: f64,
}

/// Append-only record of scalar operations for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

/// A scalar that is either a constant or a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: usize,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{} = {})", self.idx, self.val),
            None => write!(f, "Var(const {})", self.val),
        }
    }
}

/// Adjoints of every node, indexed by tape position.
#[derive(Clone, Debug)]
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    /// `∂out/∂v`. Zero for constants and for nodes recorded after the output.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        match v.tape {
            Some(_) => self.0.get(v.idx).copied().unwrap_or(0.0),
            None => 0.0,
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent variable.
    pub fn input(&self, value: f64) -> Var<'_> {
        self.leaf(Op::Input, value)
    }

    fn leaf(&self, op: Op, value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        nodes.push(Node {
            op,
            args: [idx, idx],
            partials: [0.0, 0.0],
            value,
        });
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    fn push(&self, op: Op, args: [usize; 2], a: f64, b: f64) -> Var<'_> {
        let (value, partials) = op.apply(a, b);
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        nodes.push(Node {
            op,
            args,
            partials,
            value,
        });
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    /// Reverse sweep from `out`. Fails on the first node, in recording order,
    /// whose value or adjoint is not finite.
    pub fn gradient(&self, out: Var<'_>) -> Result<Adjoints> {
        let nodes = self.nodes.borrow();
        let Some(tape) = out.tape else {
            return Ok(Adjoints(vec![0.0; nodes.len()]));
        };
        assert!(std::ptr::eq(tape, self), "output belongs to another tape");
        let end = out.idx + 1;
        if let Some(i) = nodes[..end].iter().position(|n| !n.value.is_finite()) {
            return Err(Error::non_finite(
                format!("tape value at {} node", nodes[i].op.name()),
                i,
            ));
        }
        let mut adj = vec![0.0; nodes.len()];
        adj[out.idx] = 1.0;
        for i in (0..end).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..node.op.arity() {
                adj[node.args[k]] += g * node.partials[k];
            }
        }
        if let Some(i) = adj[..end].iter().position(|g| !g.is_finite()) {
            return Err(Error::non_finite(
                format!("adjoint at {} node", nodes[i].op.name()),
                i,
            ));
        }
        Ok(Adjoints(adj))
    }

    /// Recomputes every node from the recorded inputs.
    pub fn replay(&self) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let inputs: Vec<f64> = nodes
            .iter()
            .filter(|n| n.op == Op::Input)
            .map(|n| n.value)
            .collect();
        drop(nodes);
        self.replay_with(&inputs)
    }

    /// Recomputes every node with the inputs replaced, in registration order.
    pub fn replay_with(&self, inputs: &[f64]) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut values = Vec::with_capacity(nodes.len());
        let mut next_input = 0;
        for n in nodes.iter() {
            let v = match n.op {
                Op::Input => {
                    next_input += 1;
                    inputs[next_input - 1]
                }
                Op::Const => n.value,
                op => op.apply(values[n.args[0]], values[n.args[1]]).0,
            };
            values.push(v);
        }
        values
    }

    /// Writes `index,op,arg0,arg1,value,partial0,partial1` for every node.
    pub fn write_partials_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,op,arg0,arg1,value,partial0,partial1")?;
        for (i, n) in self.nodes.borrow().iter().enumerate() {
            let arity = n.op.arity();
            let arg = |k: usize| {
                if k < arity {
                    n.args[k].to_string()
                } else {
                    String::new()
                }
            };
            writeln!(
                out,
                "{i},{},{},{},{:e},{:e},{:e}",
                n.op.name(),
                arg(0),
                arg(1),
                n.value,
                n.partials[0],
                n.partials[1]
            )?;
        }
        Ok(())
    }

    #[cfg(test)]
    fn node(&self, i: usize) -> Node {
        self.nodes.borrow()[i]
    }
}

impl<'t> Var<'t> {
    /// A value that is not on any tape.
    pub fn constant(value: f64) -> Self {
        Var {
            tape: None,
            idx: 0,
            val: value,
        }
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    /// Tape position, `None` for constants.
    pub fn index(&self) -> Option<usize> {
        self.tape.map(|_| self.idx)
    }

    fn unary(self, op: Op) -> Self {
        match self.tape {
            Some(t) => t.push(op, [self.idx, self.idx], self.val, 0.0),
            None => Var::constant(op.apply(self.val, 0.0).0),
        }
    }

    fn binary(self, rhs: Self, op: Op, lhs_const: fn(f64) -> Op, rhs_const: fn(f64) -> Op) -> Self {
        match (self.tape, rhs.tape) {
            (Some(t), Some(u)) => {
                assert!(std::ptr::eq(t, u), "operands belong to different tapes");
                t.push(op, [self.idx, rhs.idx], self.val, rhs.val)
            }
            (Some(_), None) => self.unary(rhs_const(rhs.val)),
            (None, Some(_)) => rhs.unary(lhs_const(self.val)),
            (None, None) => Var::constant(op.apply(self.val, rhs.val).0),
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, Op::AddC, Op::AddC)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, Op::SubFromC, |c| Op::AddC(-c))
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, Op::MulC, Op::MulC)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Div, Op::DivIntoC, Op::DivByC)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(Op::AddC(c))
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(Op::AddC(-c))
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(Op::MulC(c))
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(Op::DivByC(c))
    }
}

impl<'t> Scalar for Var<'t> {
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        self.unary(Op::Exp)
    }
    fn tanh(self) -> Self {
        self.unary(Op::Tanh)
    }
    fn sin(self) -> Self {
        self.unary(Op::Sin)
    }
    fn cos(self) -> Self {
        self.unary(Op::Cos)
    }
    fn sqrt(self) -> Self {
        self.unary(Op::Sqrt)
    }
    fn stop_gradient(self) -> Self {
        self.unary(Op::StopGradient)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn primitive_partials_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a: f64 = rng.gen_range(0.1..2.0);
            let b: f64 = rng.gen_range(0.1..2.0);
            let c: f64 = rng.gen_range(-2.0..2.0);
            let tape = Tape::new();
            let (x, y) = (tape.input(a), tape.input(b));
            let cases: Vec<(Var<'_>, [f64; 2])> = vec![
                (x + y, [1.0, 1.0]),
                (x - y, [1.0, -1.0]),
                (x * y, [b, a]),
                (x / y, [1.0 / b, -a / (b * b)]),
                (-x, [-1.0, 0.0]),
                (x + c, [1.0, 0.0]),
                (x * c, [c, 0.0]),
                (Var::constant(c) - x, [-1.0, 0.0]),
                (x / c, [1.0 / c, 0.0]),
                (Var::constant(c) / x, [-c / (a * a), 0.0]),
                (x.exp(), [a.exp(), 0.0]),
                (x.tanh(), [1.0 / a.cosh().powi(2), 0.0]),
                (x.sin(), [a.cos(), 0.0]),
                (x.cos(), [-a.sin(), 0.0]),
                (x.sqrt(), [0.5 / a.sqrt(), 0.0]),
                (x.stop_gradient(), [0.0, 0.0]),
            ];
            for (v, expected) in cases {
                let node = tape.node(v.idx);
                for k in 0..node.op.arity() {
                    let got = node.partials[k];
                    let ok = if expected[k] == 0.0 {
                        got == 0.0
                    } else {
                        rel(got, expected[k]) < 1e-12
                    };
                    assert!(ok, "{:?} partial {k}: {got} vs {}", node.op, expected[k]);
                }
            }
        }
    }

    #[test]
    fn replay_is_bit_exact() {
        let tape = Tape::new();
        let x = tape.input(0.37);
        let y = tape.input(-1.9);
        let z = ((x * y).tanh() + (x / y).exp() - y.cos() * 3.0).sqrt() / (x.sin() + 2.0);
        let recorded: Vec<f64> = (0..tape.len()).map(|i| tape.node(i).value).collect();
        let replayed = tape.replay();
        assert_eq!(
            recorded.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            replayed.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(replayed[z.idx].to_bits(), z.val.to_bits());
        let moved = tape.replay_with(&[0.5, -1.0]);
        assert_ne!(moved[z.idx], z.val);
    }

    #[test]
    fn arguments_precede_their_nodes() {
        let tape = Tape::new();
        let x = tape.input(0.5);
        let mut acc = x;
        for _ in 0..10 {
            acc = acc * x + acc.sin();
        }
        for i in 0..tape.len() {
            let n = tape.node(i);
            for k in 0..n.op.arity() {
                assert!(n.args[k] < i);
            }
        }
    }

    #[test]
    fn non_finite_reports_first_bad_node() {
        let tape = Tape::new();
        let x = tape.input(-1.0);
        let ok = x * 2.0;
        let bad = x.sqrt();
        let out = ok + bad;
        match tape.gradient(out) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, bad.idx),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn constants_stay_off_the_tape() {
        let tape = Tape::new();
        let x = tape.input(2.0);
        let c = Var::constant(3.0) * Var::constant(4.0);
        assert_eq!(c.index(), None);
        assert_eq!(tape.len(), 1);
        let y = c * x;
        assert_eq!(tape.len(), 2);
        let g = tape.gradient(y).unwrap();
        assert_eq!(g.wrt(x), 12.0);
        assert_eq!(g.wrt(c), 0.0);
    }

    #[test]
    fn gradients_are_deterministic() {
        let run = || {
            let tape = Tape::new();
            let xs: Vec<Var<'_>> = (0..50).map(|i| tape.input(i as f64 * 0.01)).collect();
            let mut acc = Var::constant(0.0);
            for (i, &x) in xs.iter().enumerate() {
                acc = acc + (x * (i as f64)).tanh() * xs[(i * 7) % 50];
            }
            let g = tape.gradient(acc).unwrap();
            xs.iter().map(|x| g.wrt(*x).to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn csv_dump_has_one_row_per_node() {
        let tape = Tape::new();
        let x = tape.input(1.0);
        let _ = (x * x).exp();
        let mut buf = Vec::new();
        tape.write_partials_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + tape.len());
        assert!(lines[2].starts_with("1,mul,0,0,"));
    }
}
