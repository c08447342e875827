//! Reverse-mode automatic differentiation over a Wengert list.
//!
//! Every operation appends a node holding up to two `(parent, ∂out/∂parent)`
//! pairs; [`Tape::gradient`] sweeps the list backwards once.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::ops::{Add, Div, Mul, Neg, Sub};


use num_traits::Float;
use super::Objective;
use crate::{Error, Result};

#[derive(Clone, Copy)]
struct Node {
    parents: [(usize, f64); 2],
    arity: u8,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
    val: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, parents: [(usize, f64); 2], arity: u8) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, arity });
        nodes.len() - 1
    }

    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push([(0, 0.0); 2], 0);
        Var { tape: self, idx, val }
    }

    /// Constants are leaves too; their adjoint is simply never read.
    pub fn constant(&self, val: f64) -> Var<'_> {
        self.var(val)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adjoints of every node with respect to `out`.
    pub fn gradient(&self, out: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[out.idx] = 1.0;
        for i in (0..=out.idx).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            for &(p, d) in &n.parents[..n.arity as usize] {
                adj[p] += a * d;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.val
    }

    fn unary(self, val: f64, d: f64) -> Var<'t> {
        let idx = self.tape.push([(self.idx, d), (0, 0.0)], 1);
        Var { tape: self.tape, idx, val }
    }

    fn binary(self, other: Var<'t>, val: f64, da: f64, db: f64) -> Var<'t> {
        let idx = self.tape.push([(self.idx, da), (other.idx, db)], 2);
        Var { tape: self.tape, idx, val }
    }

    pub fn tanh(self) -> Var<'t> {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }

    pub fn sigmoid(self) -> Var<'t> {
        let s = 1.0 / (1.0 + (-self.val).exp());
        self.unary(s, s * (1.0 - s))
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(self.val.sin(), self.val.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(self.val.cos(), -self.val.sin())
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.val.exp();
        self.unary(e, e)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(self.val.ln(), 1.0 / self.val)
    }

    pub fn sqrt(self) -> Var<'t> {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }

    pub fn powi(self, n: i32) -> Var<'t> {
        self.unary(self.val.powi(n), f64::from(n) * self.val.powi(n - 1))
    }

    pub fn abs(self) -> Var<'t> {
        let s = if self.val >= 0.0 { 1.0 } else { -1.0 };
        self.unary(self.val.abs(), s)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, v: Var<'t>) -> Var<'t> {
        v + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        v.unary(self - v.val, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}

/// An [`Objective`] defined by a closure over tape variables.
pub struct TapeObjective<F> {
    dim: usize,
    f: F,
}

impl<F> TapeObjective<F>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for TapeObjective<F>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
        Ok((self.f)(&tape, &vars).value())
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        if grad.len() != x.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient buffer",
                expected: x.len(),
                found: grad.len(),
            });
        }
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
        let out = (self.f)(&tape, &vars);
        let adj = tape.gradient(out);
        for (g, v) in grad.iter_mut().zip(&vars) {
            *g = adj[v.idx];
        }
        Ok(out.value())
    }
}
