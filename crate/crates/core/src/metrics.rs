//! Fit index, rmse and the transient-skipping MSE.
//!
//! All functions count samples `k >= n_skip` only.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn counted<'a>(y: &'a [f64], y_hat: &'a [f64], n_skip: usize) -> Result<(&'a [f64], &'a [f64])> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction",
            expected: y.len(),
            found: y_hat.len(),
        });
    }
    if n_skip >= y.len() {
        return Err(Error::config("n_skip must be smaller than the sequence length"));
    }
    Ok((&y[n_skip..], &y_hat[n_skip..]))
}

fn sse(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Mean squared residual over the counted samples.
pub fn mse_loss(y: &[f64], y_hat: &[f64], n_skip: usize) -> Result<f64> {
    let (y, y_hat) = counted(y, y_hat, n_skip)?;
    Ok(sse(y, y_hat) / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64], n_skip: usize) -> Result<f64> {
    mse_loss(y, y_hat, n_skip).map(f64::sqrt)
}

/// `100 (1 − ‖y − ŷ‖ / ‖y − ȳ‖)`, in percent.
pub fn fit_index(y: &[f64], y_hat: &[f64], n_skip: usize) -> Result<f64> {
    let (y, y_hat) = counted(y, y_hat, n_skip)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let den: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if den == 0.0 || !den.is_finite() {
        return Err(Error::ConstantOutput);
    }
    Ok(100.0 * (1.0 - (sse(y, y_hat) / den).sqrt()))
}

/// Transient length: 100 samples, or a tenth of short sequences.
pub fn default_n_skip(len: usize) -> usize {
    if len >= 1000 {
        100
    } else {
        len / 10
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fit_percent: f64,
    /// In the units of `y` as passed in.
    pub rmse: f64,
    pub mse: f64,
    pub n_used: usize,
    pub n_skip: usize,
}

impl MetricsReport {
    pub fn compute(y: &[f64], y_hat: &[f64], n_skip: usize) -> Result<Self> {
        let mse = mse_loss(y, y_hat, n_skip)?;
        Ok(Self {
            fit_percent: fit_index(y, y_hat, n_skip)?,
            rmse: mse.sqrt(),
            mse,
            n_used: y.len() - n_skip,
            n_skip,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use alloc::vec::Vec;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn worked_examples() {
        let y = [1.0, 2.0, 3.0];
        assert!((fit_index(&y, &[1.0, 2.0, 4.0], 0).unwrap() - 29.289322).abs() < 1e-5);
        assert!((rmse(&y, &[1.0, 2.0, 4.0], 0).unwrap() - 0.5773503).abs() < 1e-7);
        assert_eq!(fit_index(&y, &y, 0).unwrap(), 100.0);
        assert_eq!(fit_index(&y, &[2.0, 2.0, 2.0], 0).unwrap(), 0.0);
        assert_eq!(rmse(&y, &y, 0).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v - 0.25).collect();
        assert!((rmse(&y, &shifted, 0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn skip_boundaries() {
        let y = [1.0, 5.0, 2.0, 7.0];
        let yh = [0.0, 0.0, 0.0, 4.0];
        assert_eq!(mse_loss(&y, &yh, 3).unwrap(), 9.0);
        assert!(mse_loss(&y, &yh, 4).is_err());
        assert_eq!(mse_loss(&y, &y, 0).unwrap(), 0.0);
        assert!(matches!(fit_index(&[3.0; 5], &[1.0; 5], 1), Err(Error::ConstantOutput)));
        assert!(matches!(mse_loss(&y, &yh[..2], 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn n_skip_default() {
        assert_eq!(default_n_skip(40960), 100);
        assert_eq!(default_n_skip(1000), 100);
        assert_eq!(default_n_skip(250), 25);
        assert_eq!(default_n_skip(100), 10);
    }

    #[test]
    fn report_fields() {
        let r = MetricsReport::compute(&[1.0, 2.0, 3.0, 5.0], &[9.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(r.n_used, 3);
        assert_eq!(r.n_skip, 1);
        assert!((r.rmse * r.rmse - r.mse).abs() < 1e-15);
    }

    #[test]
    fn noise_never_helps_on_average() {
        let mut rng = rng_from_seed(21);
        let y: Vec<f64> = (0..200).map(|k| (k as f64 * 0.1).sin()).collect();
        let base: Vec<f64> = y.iter().map(|v| v + 0.05).collect();
        let m0 = mse_loss(&y, &base, 0).unwrap();
        let mut acc = 0.0;
        for _ in 0..100 {
            let noisy: Vec<f64> = base
                .iter()
                .map(|v| v + 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            acc += mse_loss(&y, &noisy, 0).unwrap();
        }
        assert!(acc / 100.0 > m0);
        let _ = rng.random::<u8>();
    }

    proptest! {
        #[test]
        fn fit_affine_invariant(
            y in proptest::collection::vec(-10.0f64..10.0, 3..40),
            e in proptest::collection::vec(-1.0f64..1.0, 40),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
        ) {
            let yh: Vec<f64> = y.iter().zip(&e).map(|(a, b)| a + b).collect();
            let f0 = fit_index(&y, &yh, 0);
            prop_assume!(f0.is_ok());
            let ys: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
            let yhs: Vec<f64> = yh.iter().map(|v| scale * v + shift).collect();
            let f1 = fit_index(&ys, &yhs, 0).unwrap();
            prop_assert!((f0.unwrap() - f1).abs() <= 1e-6 * (1.0 + f1.abs()));
        }

        #[test]
        fn rmse_squared_is_mse(
            y in proptest::collection::vec(-1e3f64..1e3, 1..50),
            d in -5.0f64..5.0,
        ) {
            let yh: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + d * (i as f64).cos()).collect();
            let m = mse_loss(&y, &yh, 0).unwrap();
            let r = rmse(&y, &yh, 0).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert!((r * r - m).abs() <= 1e-12 * (1.0 + m));
        }
    }
}
