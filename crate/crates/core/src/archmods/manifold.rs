//! Affine lifting `θ = V φ + θ_bias` from manifold coordinates to base
//! parameters. The flat meta-parameter vector is `γ = [vec(V); θ_bias]`
//! with `V` stored row-major (`n_θ` rows of `n_φ`).

use alloc::vec;
use alloc::vec::Vec;

use super::layout::Layout;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Manifold {
    pub n_theta: usize,
    pub n_phi: usize,
    pub v: Vec<f64>,
    pub theta_bias: Vec<f64>,
}

impl Manifold {
    pub fn new(n_theta: usize, n_phi: usize, v: Vec<f64>, theta_bias: Vec<f64>) -> Result<Self> {
        if n_phi == 0 || n_phi >= n_theta {
            return Err(Error::config("manifold dimension must satisfy 0 < n_phi < n_theta"));
        }
        if v.len() != n_theta * n_phi {
            return Err(Error::DimensionMismatch {
                what: "lifting matrix V",
                expected: n_theta * n_phi,
                found: v.len(),
            });
        }
        if theta_bias.len() != n_theta {
            return Err(Error::DimensionMismatch {
                what: "theta_bias",
                expected: n_theta,
                found: theta_bias.len(),
            });
        }
        Ok(Self { n_theta, n_phi, v, theta_bias })
    }

    /// `(n_φ + 1) · n_θ`
    pub fn gamma_len(n_theta: usize, n_phi: usize) -> usize {
        (n_phi + 1) * n_theta
    }

    pub fn gamma_layout(n_theta: usize, n_phi: usize) -> Layout {
        Layout::builder()
            .weight("V", n_theta, n_phi)
            .bias("theta_bias", n_theta)
            .build()
    }

    pub fn from_gamma(n_theta: usize, n_phi: usize, gamma: &[f64]) -> Result<Self> {
        let split = n_theta * n_phi;
        if gamma.len() != Self::gamma_len(n_theta, n_phi) {
            return Err(Error::DimensionMismatch {
                what: "gamma",
                expected: Self::gamma_len(n_theta, n_phi),
                found: gamma.len(),
            });
        }
        Self::new(n_theta, n_phi, gamma[..split].to_vec(), gamma[split..].to_vec())
    }

    pub fn to_gamma(&self) -> Vec<f64> {
        let mut g = self.v.clone();
        g.extend_from_slice(&self.theta_bias);
        g
    }

    /// Writes `V φ + θ_bias` into `theta`.
    pub fn lift_into(&self, phi: &[f64], theta: &mut [f64]) -> Result<()> {
        if phi.len() != self.n_phi {
            return Err(Error::DimensionMismatch {
                what: "phi",
                expected: self.n_phi,
                found: phi.len(),
            });
        }
        for ((t, row), b) in theta
            .iter_mut()
            .zip(self.v.chunks_exact(self.n_phi))
            .zip(&self.theta_bias)
        {
            *t = b + row.iter().zip(phi).map(|(v, p)| v * p).sum::<f64>();
        }
        Ok(())
    }

    /// `Vᵀ g_θ`
    pub fn pullback(&self, grad_theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_phi];
        for (row, g) in self.v.chunks_exact(self.n_phi).zip(grad_theta) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * g;
            }
        }
        out
    }

    /// Accumulates `∂L/∂γ` given `∂L/∂θ` at coordinates `phi`:
    /// `∂V += g_θ φᵀ`, `∂θ_bias += g_θ`.
    pub fn accumulate_gamma_grad(&self, phi: &[f64], grad_theta: &[f64], grad_gamma: &mut [f64]) {
        let split = self.n_theta * self.n_phi;
        let (gv, gb) = grad_gamma.split_at_mut(split);
        for ((row, g), b) in gv.chunks_exact_mut(self.n_phi).zip(grad_theta).zip(gb) {
            for (r, p) in row.iter_mut().zip(phi) {
                *r += g * p;
            }
            *b += g;
        }
    }
}

pub fn lift(m: &Manifold, phi: &[f64]) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; m.n_theta];
    m.lift_into(phi, &mut theta)?;
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archmods::{theta_count, SsmConfig};

    fn sample() -> Manifold {
        let v = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        Manifold::new(6, 2, v, vec![1.0, -1.0, 0.5, 0.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn zero_coordinates_give_bias() {
        let m = sample();
        assert_eq!(lift(&m, &[0.0, 0.0]).unwrap(), m.theta_bias);
        let flat = Manifold { v: vec![0.0; 12], ..m.clone() };
        assert_eq!(lift(&flat, &[3.0, -7.0]).unwrap(), m.theta_bias);
    }

    #[test]
    fn gamma_dimension() {
        assert_eq!(Manifold::gamma_len(244, 20), 5124);
        let n_theta = theta_count(&SsmConfig::default());
        assert_eq!(Manifold::gamma_len(n_theta, 20), 21 * n_theta);
        assert_eq!(Manifold::gamma_layout(n_theta, 20).total(), 21 * n_theta);
    }

    #[test]
    fn gamma_roundtrip_and_pullback() {
        let m = sample();
        let g = m.to_gamma();
        assert_eq!(Manifold::from_gamma(6, 2, &g).unwrap(), m);
        let gt = [1.0, 0.0, 2.0, -1.0, 0.5, 0.25];
        let pb = m.pullback(&gt);
        for j in 0..2 {
            let want: f64 = (0..6).map(|i| m.v[i * 2 + j] * gt[i]).sum();
            assert!((pb[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Manifold::new(4, 4, vec![0.0; 16], vec![0.0; 4]).is_err());
        assert!(Manifold::new(4, 2, vec![0.0; 7], vec![0.0; 4]).is_err());
        assert!(lift(&sample(), &[1.0]).is_err());
    }
}
