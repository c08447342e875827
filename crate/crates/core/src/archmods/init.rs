//! Parameter initialization: Glorot-uniform weights, zero biases,
//! `A = 0.9 I` for the state matrix.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::encoder::EncoderLayout;
use super::layout::Layout;
use super::manifold::Manifold;
use super::ssm::ThetaLayout;
use crate::Result;

const A_RADIUS: f64 = 0.9;

/// Fills every weight segment with U(−b, b), b = √(6/(fan_in+fan_out));
/// bias segments are zeroed.
pub fn glorot_fill<R: Rng + ?Sized>(layout: &Layout, params: &mut [f64], rng: &mut R) {
    for seg in layout.segments() {
        let block = &mut params[seg.range()];
        if seg.bias {
            block.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let bound = (6.0 / (seg.rows + seg.cols) as f64).sqrt();
        for v in block.iter_mut() {
            *v = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
}

pub fn init_ssm<R: Rng + ?Sized>(lay: &ThetaLayout, rng: &mut R) -> Vec<f64> {
    let mut theta = vec![0.0; lay.total()];
    glorot_fill(lay.layout(), &mut theta, rng);
    let a = lay.layout().get("A").expect("state matrix segment").range();
    let nx = lay.cfg.n_x;
    for (i, v) in theta[a].iter_mut().enumerate() {
        *v = if i / nx == i % nx { A_RADIUS } else { 0.0 };
    }
    theta
}

/// `V` entries i.i.d. N(0, 1/n_θ); `θ_bias` is a fresh base-model init.
pub fn init_manifold<R: Rng + ?Sized>(lay: &ThetaLayout, n_phi: usize, rng: &mut R) -> Result<Manifold> {
    let n_theta = lay.total();
    let normal = Normal::new(0.0, 1.0 / (n_theta as f64).sqrt()).expect("positive std");
    let v: Vec<f64> = (0..n_theta * n_phi).map(|_| normal.sample(rng)).collect();
    let theta_bias = init_ssm(lay, rng);
    Manifold::new(n_theta, n_phi, v, theta_bias)
}

pub fn init_encoder<R: Rng + ?Sized>(lay: &EncoderLayout, rng: &mut R) -> Vec<f64> {
    let mut psi = vec![0.0; lay.total()];
    glorot_fill(lay.layout(), &mut psi, rng);
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archmods::{EncoderConfig, SsmConfig};
    use crate::rng::rng_from_seed;

    #[test]
    fn fixed_seed_is_bit_identical() {
        let lay = ThetaLayout::new(SsmConfig::default()).unwrap();
        let a = init_ssm(&lay, &mut rng_from_seed(11));
        let b = init_ssm(&lay, &mut rng_from_seed(11));
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let m1 = init_manifold(&lay, 4, &mut rng_from_seed(3)).unwrap();
        let m2 = init_manifold(&lay, 4, &mut rng_from_seed(3)).unwrap();
        assert_eq!(m1, m2);
        let el = EncoderLayout::new(EncoderConfig { n_in: 2, n_h: 6, head_hidden: 5, n_phi: 2 }).unwrap();
        assert_eq!(init_encoder(&el, &mut rng_from_seed(1)), init_encoder(&el, &mut rng_from_seed(1)));
        assert_ne!(init_ssm(&lay, &mut rng_from_seed(12)), a);
    }

    #[test]
    fn biases_are_zero() {
        let lay = ThetaLayout::new(SsmConfig::default()).unwrap();
        let theta = init_ssm(&lay, &mut rng_from_seed(2));
        let el = EncoderLayout::new(EncoderConfig { n_in: 2, n_h: 6, head_hidden: 5, n_phi: 2 }).unwrap();
        let psi = init_encoder(&el, &mut rng_from_seed(2));
        for (layout, p) in [(lay.layout(), &theta), (el.layout(), &psi)] {
            for seg in layout.segments() {
                let block = &p[seg.range()];
                if seg.bias {
                    assert!(block.iter().all(|v| *v == 0.0), "{}", seg.name);
                } else {
                    assert!(block.iter().any(|v| *v != 0.0), "{}", seg.name);
                }
            }
        }
    }

    #[test]
    fn state_matrix_is_scaled_identity() {
        let lay = ThetaLayout::new(SsmConfig::default()).unwrap();
        let theta = init_ssm(&lay, &mut rng_from_seed(5));
        let blocks = lay.layout().decode(&theta).unwrap();
        let a = blocks.iter().find(|(n, _)| *n == "A").unwrap().1;
        assert_eq!(a, &[0.9, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.9]);
    }

    #[test]
    fn glorot_bounds_respected() {
        let lay = ThetaLayout::new(SsmConfig::default()).unwrap();
        let theta = init_ssm(&lay, &mut rng_from_seed(9));
        let seg = lay.layout().get("f.w1").unwrap();
        let bound = (6.0f64 / (16 + 4) as f64).sqrt();
        assert!(theta[seg.range()].iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn manifold_v_variance() {
        let lay = ThetaLayout::new(SsmConfig::default()).unwrap();
        let m = init_manifold(&lay, 20, &mut rng_from_seed(8)).unwrap();
        let n = m.v.len() as f64;
        let var = m.v.iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var * 227.0 - 1.0).abs() < 0.1, "{var}");
    }
}
