//! Eigenvalues of dense symmetric matrices: Householder reduction to
//! tridiagonal form followed by implicit QL with Wilkinson-style shifts.

use alloc::vec;
use alloc::vec::Vec;


use num_traits::Float;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Row-major `n × n` data.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Replaces the matrix by (M + Mᵀ)/2.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Full real spectrum of `m`, ascending. The input is symmetrized first.
pub fn sym_eig(m: &SymMatrix) -> Result<Vec<f64>> {
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries"));
    }
    let n = m.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    a.symmetrize();
    let (mut d, mut e) = tridiagonalize(&mut a);
    ql_implicit(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    Ok(d)
}

/// Returns diagonal `d` and super-diagonal `e` (with `e[n-1] = 0`).
fn tridiagonalize(a: &mut SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a.get(i, k).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a.get(k + 1, k);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for i in k + 1..n {
            v[i] = a.get(i, k);
        }
        v[k + 1] -= alpha;
        let vn = (k + 1..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for i in k + 1..n {
            v[i] /= vn;
        }
        // H A H on the trailing block, H = I − 2 v vᵀ.
        for i in k + 1..n {
            p[i] = (k + 1..n).map(|j| a.get(i, j) * v[j]).sum();
        }
        let kv: f64 = (k + 1..n).map(|i| v[i] * p[i]).sum();
        for i in k + 1..n {
            p[i] -= kv * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let upd = a.get(i, j) - 2.0 * (v[i] * p[j] + p[i] * v[j]);
                a.set(i, j, upd);
            }
        }
        a.set(k + 1, k, alpha);
        a.set(k, k + 1, alpha);
        for i in k + 2..n {
            a.set(i, k, 0.0);
            a.set(k, i, 0.0);
        }
    }
    let d = (0..n).map(|i| a.get(i, i)).collect();
    let e = (0..n).map(|i| if i + 1 < n { a.get(i + 1, i) } else { 0.0 }).collect();
    (d, e)
}

fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NonFinite("QL iteration failed to converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = rng_from_seed(seed);
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random::<f64>() * 2.0 - 1.0;
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    /// Real roots of λ³ + a λ² + b λ + c (three real roots assumed), ascending.
    fn cubic_roots(a: f64, b: f64, c: f64) -> [f64; 3] {
        let q = (a * a - 3.0 * b) / 9.0;
        let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
        let theta = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let s = -2.0 * q.sqrt();
        let tau = 2.0 * core::f64::consts::PI;
        let mut out = [
            s * (theta / 3.0).cos() - a / 3.0,
            s * ((theta + tau) / 3.0).cos() - a / 3.0,
            s * ((theta - tau) / 3.0).cos() - a / 3.0,
        ];
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out
    }

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(sym_eig(&SymMatrix::identity(5)).unwrap(), alloc::vec![1.0; 5]);
        let d = SymMatrix::from_rows(3, alloc::vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(sym_eig(&d).unwrap(), alloc::vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn three_by_three_matches_characteristic_cubic() {
        for seed in 0..20 {
            let m = random_sym(3, seed);
            let g = |i, j| m.get(i, j);
            // det(λI − M) = λ³ − tr λ² + (sum of principal 2-minors) λ − det
            let tr = m.trace();
            let minors = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) + g(0, 0) * g(2, 2) - g(0, 2) * g(2, 0)
                + g(1, 1) * g(2, 2)
                - g(1, 2) * g(2, 1);
            let det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
            let want = cubic_roots(-tr, minors, -det);
            let got = sym_eig(&m).unwrap();
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn trace_and_orthogonal_similarity() {
        for (n, seed) in [(4, 1), (17, 2), (60, 3)] {
            let m = random_sym(n, seed);
            let l = sym_eig(&m).unwrap();
            assert!(l.windows(2).all(|w| w[0] <= w[1]));
            let s: f64 = l.iter().sum();
            assert!((s - m.trace()).abs() <= 1e-8 * m.trace().abs().max(1.0));

            // Householder reflection Q = I − 2 w wᵀ, |w| = 1.
            let mut rng = rng_from_seed(seed + 100);
            let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            w.iter_mut().for_each(|v| *v /= wn);
            let q = |i: usize, j: usize| f64::from(u8::from(i == j)) - 2.0 * w[i] * w[j];
            let mut qm = SymMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        for t in 0..n {
                            acc += q(i, k) * m.get(k, t) * q(t, j);
                        }
                    }
                    qm.set(i, j, acc);
                }
            }
            let l2 = sym_eig(&qm).unwrap();
            for (a, b) in l.iter().zip(&l2) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        let m = SymMatrix::from_rows(2, alloc::vec![1.0, f64::NAN, f64::NAN, 1.0]).unwrap();
        assert!(sym_eig(&m).is_err());
    }
}
