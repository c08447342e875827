//! Gradients and small dense linear algebra.
//!
//! Model losses implement [`Objective`] with hand-written adjoints (BPTT
//! through the rollouts). [`tape`] is an independent reverse-mode engine for
//! arbitrary scalar expressions; tests use it to cross-check the adjoints.

mod eig;
pub mod tape;

use alloc::vec;
use alloc::vec::Vec;

pub use eig::{sym_eig, SymMatrix};

use crate::{Error, Result};

/// A scalar loss over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Writes ∇f(x) into `grad` and returns f(x).
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl<O: Objective + ?Sized> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).value_grad(x, grad)
    }
}

fn check_dim(f: &impl Objective, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected: f.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Loss value and exact gradient; rejects non-finite results.
pub fn value_and_grad(f: &impl Objective, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim(f, x)?;
    let mut g = vec![0.0; x.len()];
    let v = f.value_grad(x, &mut g)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("loss value"));
    }
    if g.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("loss gradient"));
    }
    Ok((v, g))
}

/// Central differences `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn finite_diff_grad(f: &impl Objective, x: &[f64], h: f64) -> Result<Vec<f64>> {
    check_dim(f, x)?;
    if !(h > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let mut xp = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f.value(&xp)?;
        xp[i] = x[i] - h;
        let fm = f.value(&xp)?;
        xp[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Restriction of an objective to a subset of coordinates; the remaining
/// coordinates stay at `base`.
pub struct Subspace<O> {
    pub inner: O,
    pub base: Vec<f64>,
    pub free: Vec<usize>,
}

impl<O: Objective> Subspace<O> {
    pub fn new(inner: O, base: Vec<f64>, free: Vec<usize>) -> Result<Self> {
        if base.len() != inner.dim() {
            return Err(Error::DimensionMismatch {
                what: "subspace base point",
                expected: inner.dim(),
                found: base.len(),
            });
        }
        if free.iter().any(|&i| i >= base.len()) {
            return Err(Error::InvalidConfig("subspace index out of range".into()));
        }
        Ok(Self { inner, base, free })
    }

    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (&i, &v) in self.free.iter().zip(x) {
            full[i] = v;
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }
}

impl<O: Objective> Objective for Subspace<O> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.inner.value(&self.embed(x))
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let full = self.embed(x);
        let mut g = vec![0.0; full.len()];
        let v = self.inner.value_grad(&full, &mut g)?;
        for (out, &i) in grad.iter_mut().zip(&self.free) {
            *out = g[i];
        }
        Ok(v)
    }
}

/// Sum of two objectives over the same parameters.
pub struct Sum<A, B>(pub A, pub B);

impl<A: Objective, B: Objective> Objective for Sum<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.value(x)? + self.1.value(x)?)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut g2 = vec![0.0; grad.len()];
        let v = self.0.value_grad(x, grad)? + self.1.value_grad(x, &mut g2)?;
        for (a, b) in grad.iter_mut().zip(g2) {
            *a += b;
        }
        Ok(v)
    }
}

/// Dense Hessian from central differences of the exact gradient, column
/// `j` from `∇f(x ± h e_j)`, then symmetrized.
pub fn fd_hessian(f: &impl Objective, x: &[f64], h: f64) -> Result<SymMatrix> {
    check_dim(f, x)?;
    if !(h > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let n = x.len();
    let mut m = SymMatrix::zeros(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let (_, gp) = value_and_grad(f, &xp)?;
        xp[j] = x[j] - h;
        let (_, gm) = value_and_grad(f, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            m.set(i, j, (gp[i] - gm[i]) / (2.0 * h));
        }
    }
    m.symmetrize();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::tape::{Tape, TapeObjective, Var};
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn scalar_examples() {
        let sq = TapeObjective::new(1, |_t: &Tape, x: &[Var]| x[0] * x[0]);
        let (v, g) = value_and_grad(&sq, &[3.0]).unwrap();
        assert_eq!((v, g[0]), (9.0, 6.0));

        let th = TapeObjective::new(1, |_t: &Tape, x: &[Var]| x[0].tanh());
        let (_, g) = value_and_grad(&th, &[0.0]).unwrap();
        assert_eq!(g[0], 1.0);

        let s = TapeObjective::new(1, |_t: &Tape, x: &[Var]| x[0].sin());
        let fd = finite_diff_grad(&s, &[0.0], 1e-6).unwrap();
        assert!((fd[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn finite_differences_exact_on_quadratics() {
        let q = TapeObjective::new(3, |_t: &Tape, x: &[Var]| {
            x[0] * x[0] * 2.0 + x[0] * x[1] - x[2] * x[2] * 0.5 + x[1] * 3.0
        });
        let x = [0.3, -1.2, 2.0];
        let (_, g) = value_and_grad(&q, &x).unwrap();
        let fd = finite_diff_grad(&q, &x, 1e-3).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn two_step_linear_ssm_hand_bptt() {
        // x1 = a x0 + b u0, x2 = a x1 + b u1 with x0 = 0; y_k = c x_k.
        // L = (c x1 − t1)² + (c x2 − t2)².
        let (u0, u1, t1, t2) = (0.7, -1.3, 0.4, 0.9);
        let f = TapeObjective::new(3, move |_t: &Tape, p: &[Var]| {
            let (a, b, c) = (p[0], p[1], p[2]);
            let x1 = b * u0;
            let x2 = a * x1 + b * u1;
            let e1 = c * x1 - t1;
            let e2 = c * x2 - t2;
            e1 * e1 + e2 * e2
        });
        let (a, b, c) = (0.8, 0.5, -1.1);
        let x1 = b * u0;
        let x2 = a * x1 + b * u1;
        let e1 = c * x1 - t1;
        let e2 = c * x2 - t2;
        let dl_da = 2.0 * e2 * c * x1;
        let dl_db = 2.0 * e1 * c * u0 + 2.0 * e2 * c * (a * u0 + u1);
        let dl_dc = 2.0 * e1 * x1 + 2.0 * e2 * x2;
        let (v, g) = value_and_grad(&f, &[a, b, c]).unwrap();
        assert!((v - (e1 * e1 + e2 * e2)).abs() < 1e-12);
        for (got, want) in g.iter().zip([dl_da, dl_db, dl_dc]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_layer_tanh_network_matches_finite_differences() {
        let mut rng = rng_from_seed(17);
        let xs: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ts: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin()).collect();
        let hidden = 4;
        let dim = 3 * hidden + 1;
        let net = TapeObjective::new(dim, move |t: &Tape, p: &[Var]| {
            let mut loss = t.constant(0.0);
            for (&x, &y) in xs.iter().zip(&ts) {
                let mut out = p[3 * hidden];
                for j in 0..hidden {
                    let h = (p[j] * x + p[hidden + j]).tanh();
                    out = out + p[2 * hidden + j] * h;
                }
                let e = out - y;
                loss = loss + e * e;
            }
            loss
        });
        let x0: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let (_, g) = value_and_grad(&net, &x0).unwrap();
        let fd = finite_diff_grad(&net, &x0, 1e-5).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_is_linear_in_the_loss() {
        let f1 = TapeObjective::new(2, |_t: &Tape, x: &[Var]| (x[0] * x[1]).sin() + x[0].exp());
        let f2 = TapeObjective::new(2, |_t: &Tape, x: &[Var]| (x[0] - x[1]).tanh() * x[1]);
        let mut rng = rng_from_seed(2);
        for _ in 0..10 {
            let x = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
            let (_, g1) = value_and_grad(&f1, &x).unwrap();
            let (_, g2) = value_and_grad(&f2, &x).unwrap();
            let (_, gs) = value_and_grad(&Sum(&f1, &f2), &x).unwrap();
            for i in 0..2 {
                assert!((gs[i] - (g1[i] + g2[i])).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn non_finite_loss_rejected() {
        let f = TapeObjective::new(1, |_t: &Tape, x: &[Var]| x[0].ln());
        assert_eq!(value_and_grad(&f, &[-1.0]).unwrap_err(), Error::NonFinite("loss value"));
    }

    #[test]
    fn subspace_restricts_gradient() {
        let f = TapeObjective::new(3, |_t: &Tape, x: &[Var]| x[0] * x[1] + x[2] * x[2]);
        let s = Subspace::new(&f, vec![2.0, 3.0, 4.0], vec![2, 0]).unwrap();
        let (v, g) = value_and_grad(&s, &[1.0, 5.0]).unwrap();
        assert_eq!(v, 5.0 * 3.0 + 1.0);
        assert_eq!(g, vec![2.0, 3.0]);
    }

    #[test]
    fn hessian_of_sum_of_squares() {
        let f = TapeObjective::new(4, |t: &Tape, x: &[Var]| {
            x.iter().fold(t.constant(0.0), |acc, &v| acc + v * v)
        });
        let h = fd_hessian(&f, &[0.1, -0.2, 0.3, 1.0], 1e-4).unwrap();
        for l in sym_eig(&h).unwrap() {
            assert!((l - 2.0).abs() < 1e-6);
        }
    }
}
