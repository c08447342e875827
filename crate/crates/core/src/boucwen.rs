//! Bouc-Wen hysteretic oscillator and meta-dataset generation.
//!
//! State `(p, v, z)`: position (m), velocity (m/s), hysteretic force (N).
//!
//! ```text
//! ṗ = v
//! v̇ = (u − k_L p − c_L v − z) / m_L
//! ż = α v − β (γ |v| |z|^(ν−1) z + δ v |z|^ν)
//! y = p
//! ```

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_from_seed};
use crate::signals::{add_noise, multisine, MultisineSpec, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoucWenCoeffs {
    pub m_l: f64,
    pub c_l: f64,
    pub k_l: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub nu: f64,
}

impl BoucWenCoeffs {
    /// Nominal benchmark coefficients.
    pub const NOMINAL: BoucWenCoeffs = BoucWenCoeffs {
        m_l: 2.0,
        c_l: 10.0,
        k_l: 5.0e4,
        alpha: 5.0e4,
        beta: 1000.0,
        gamma: 0.8,
        delta: -1.1,
        nu: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.m_l, self.c_l, self.k_l, self.alpha, self.beta, self.gamma, self.delta, self.nu,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Bouc-Wen coefficients"));
        }
        if self.m_l <= 0.0 || self.k_l <= 0.0 {
            return Err(Error::config("Bouc-Wen mass and stiffness must be positive"));
        }
        if self.nu < 1.0 {
            return Err(Error::config("Bouc-Wen exponent nu must be >= 1"));
        }
        Ok(())
    }

    #[inline]
    fn rhs(&self, x: [f64; 3], u: f64) -> [f64; 3] {
        let [p, v, z] = x;
        let az = z.abs();
        // |z|^(ν−1) is taken as 1 at ν = 1, including z = 0.
        let (zn1, zn) = if self.nu == 1.0 {
            (1.0, az)
        } else {
            (az.powf(self.nu - 1.0), az.powf(self.nu))
        };
        [
            v,
            (u - self.k_l * p - self.c_l * v - z) / self.m_l,
            self.alpha * v - self.beta * (self.gamma * v.abs() * zn1 * z + self.delta * v * zn),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn point(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t: f64 = rng.random();
        if self.min == self.max {
            self.min
        } else {
            self.min + (self.max - self.min) * t
        }
    }
}

/// Per-coefficient sampling intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffRanges {
    pub m_l: Interval,
    pub c_l: Interval,
    pub k_l: Interval,
    pub alpha: Interval,
    pub beta: Interval,
    pub gamma: Interval,
    pub delta: Interval,
    pub nu: Interval,
}

impl CoeffRanges {
    /// The benchmark family's min/max table.
    pub const fn wide() -> Self {
        Self {
            m_l: Interval::new(1.0, 3.0),
            c_l: Interval::new(5.0, 15.0),
            k_l: Interval::new(2.5e4, 7.5e4),
            alpha: Interval::new(2.5e4, 7.5e4),
            beta: Interval::new(500.0, 4500.0),
            gamma: Interval::new(0.5, 0.9),
            delta: Interval::new(-1.5, -0.5),
            nu: Interval::point(1.0),
        }
    }

    /// Degenerate ranges that always return `c`.
    pub fn fixed(c: BoucWenCoeffs) -> Self {
        Self {
            m_l: Interval::point(c.m_l),
            c_l: Interval::point(c.c_l),
            k_l: Interval::point(c.k_l),
            alpha: Interval::point(c.alpha),
            beta: Interval::point(c.beta),
            gamma: Interval::point(c.gamma),
            delta: Interval::point(c.delta),
            nu: Interval::point(c.nu),
        }
    }

    /// ±`frac` relative band around `c` (ν kept fixed).
    pub fn around(c: BoucWenCoeffs, frac: f64) -> Self {
        let band = |v: f64| {
            let a = v * (1.0 - frac);
            let b = v * (1.0 + frac);
            Interval::new(a.min(b), a.max(b))
        };
        Self {
            m_l: band(c.m_l),
            c_l: band(c.c_l),
            k_l: band(c.k_l),
            alpha: band(c.alpha),
            beta: band(c.beta),
            gamma: band(c.gamma),
            delta: band(c.delta),
            nu: Interval::point(c.nu),
        }
    }

    fn intervals(&self) -> [&Interval; 8] {
        [
            &self.m_l, &self.c_l, &self.k_l, &self.alpha, &self.beta, &self.gamma, &self.delta,
            &self.nu,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for iv in self.intervals() {
            if !(iv.min.is_finite() && iv.max.is_finite()) || iv.min > iv.max {
                return Err(Error::config("coefficient range needs finite min <= max"));
            }
        }
        if self.m_l.min <= 0.0 || self.k_l.min <= 0.0 || self.nu.min < 1.0 {
            return Err(Error::config("coefficient ranges admit invalid systems"));
        }
        Ok(())
    }
}

pub fn sample_coefficients<R: Rng + ?Sized>(ranges: &CoeffRanges, rng: &mut R) -> BoucWenCoeffs {
    BoucWenCoeffs {
        m_l: ranges.m_l.sample(rng),
        c_l: ranges.c_l.sample(rng),
        k_l: ranges.k_l.sample(rng),
        alpha: ranges.alpha.sample(rng),
        beta: ranges.beta.sample(rng),
        gamma: ranges.gamma.sample(rng),
        delta: ranges.delta.sample(rng),
        nu: ranges.nu.sample(rng),
    }
}

/// Substeps per sample used by the dataset generators unless overridden.
pub const DEFAULT_SUBSTEPS: usize = 20;

/// Classical RK4 with `substeps` fixed steps per sample and zero-order-held
/// input. Returns the position at every input sample instant.
///
/// The right-hand side has kinks where `v` or `z` change sign. A substep
/// that crosses one is split at the crossing (located by bisection on the
/// step length), which keeps the scheme fourth order.
pub fn simulate(coeffs: &BoucWenCoeffs, u: &Signal, substeps: usize, x0: [f64; 3]) -> Result<Signal> {
    coeffs.validate()?;
    if substeps == 0 {
        return Err(Error::config("substeps must be >= 1"));
    }
    if u.is_empty() {
        return Err(Error::config("input signal is empty"));
    }
    let h = 1.0 / (u.fs * substeps as f64);
    let mut x = x0;
    let mut y = Vec::with_capacity(u.len());
    for (k, &uk) in u.samples.iter().enumerate() {
        if x.iter().any(|s| !s.is_finite()) {
            return Err(Error::Diverged {
                what: "Bouc-Wen simulation",
                index: k,
            });
        }
        y.push(x[0]);
        for _ in 0..substeps {
            x = kink_step(coeffs, x, uk, h);
        }
    }
    Signal::new(y, u.fs)
}

fn sign_flip(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a[1] * b[1] < 0.0 || a[2] * b[2] < 0.0
}

fn kink_step(c: &BoucWenCoeffs, mut x: [f64; 3], u: f64, h: f64) -> [f64; 3] {
    let mut rem = h;
    for _ in 0..8 {
        let trial = rk4_step(c, x, u, rem);
        if !sign_flip(&x, &trial) {
            return trial;
        }
        let (mut lo, mut hi) = (0.0, rem);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sign_flip(&x, &rk4_step(c, x, u, mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Land just past the switching point, then finish the substep.
        x = rk4_step(c, x, u, hi);
        rem -= hi;
        if rem <= 0.0 {
            return x;
        }
    }
    rk4_step(c, x, u, rem)
}

#[inline]
fn rk4_step(c: &BoucWenCoeffs, x: [f64; 3], u: f64, h: f64) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = c.rhs(x, u);
    let k2 = c.rhs(add(x, k1, 0.5 * h), u);
    let k3 = c.rhs(add(x, k2, 0.5 * h), u);
    let k4 = c.rhs(add(x, k3, h), u);
    let mut out = x;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One system observed under two independent excitations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub u_tr: Signal,
    pub y_tr: Signal,
    pub u_te: Signal,
    pub y_te: Signal,
    pub fs: f64,
    pub coeffs: Option<BoucWenCoeffs>,
    pub noise_std: f64,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.u_tr.len() != self.y_tr.len() {
            return Err(Error::DimensionMismatch {
                what: "training output",
                expected: self.u_tr.len(),
                found: self.y_tr.len(),
            });
        }
        if self.u_te.len() != self.y_te.len() {
            return Err(Error::DimensionMismatch {
                what: "test output",
                expected: self.u_te.len(),
                found: self.y_te.len(),
            });
        }
        let fs_ok = [self.u_tr.fs, self.y_tr.fs, self.u_te.fs, self.y_te.fs]
            .iter()
            .all(|&f| f == self.fs);
        if !fs_ok {
            return Err(Error::config("dataset signals disagree on fs"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be finite and >= 0"));
        }
        if let Some(c) = &self.coeffs {
            c.validate()?;
        }
        Ok(())
    }
}

/// Everything needed to draw one dataset from the system family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub ranges: CoeffRanges,
    pub train: MultisineSpec,
    pub test: MultisineSpec,
    pub noise_std: f64,
    pub substeps: usize,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.train.validate()?;
        self.test.validate()?;
        if self.train.fs != self.test.fs {
            return Err(Error::config("train and test excitations must share fs"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be finite and >= 0"));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps must be >= 1"));
        }
        Ok(())
    }
}

/// Simulates a known system on given inputs from rest; noise on the
/// training output only.
pub fn make_dataset_with<R: Rng + ?Sized>(
    coeffs: BoucWenCoeffs,
    u_tr: Signal,
    u_te: Signal,
    noise_std: f64,
    substeps: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if u_tr.fs != u_te.fs {
        return Err(Error::config("train and test inputs must share fs"));
    }
    let clean_tr = simulate(&coeffs, &u_tr, substeps, [0.0; 3])?;
    let y_te = simulate(&coeffs, &u_te, substeps, [0.0; 3])?;
    let y_tr = add_noise(&clean_tr, noise_std, rng)?;
    Ok(Dataset {
        fs: u_tr.fs,
        u_tr,
        y_tr,
        u_te,
        y_te,
        coeffs: Some(coeffs),
        noise_std,
        seed: None,
    })
}

/// Draws a system, two independent multisines, and simulates both.
pub fn make_dataset<R: Rng + ?Sized>(spec: &DatasetSpec, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let coeffs = sample_coefficients(&spec.ranges, rng);
    let u_tr = multisine(&spec.train, rng)?;
    let u_te = multisine(&spec.test, rng)?;
    make_dataset_with(coeffs, u_tr, u_te, spec.noise_std, spec.substeps, rng)
}

/// Dataset `index` of the batch drawn under `master_seed`.
pub fn make_dataset_indexed(spec: &DatasetSpec, master_seed: u64, index: usize) -> Result<Dataset> {
    let seed = derive_seed(master_seed, "dataset", index as u64);
    let mut d = make_dataset(spec, &mut rng_from_seed(seed))?;
    d.seed = Some(seed);
    Ok(d)
}

/// `b` independent datasets; element `i` depends only on `(master_seed, i)`.
pub fn meta_batch(b: usize, spec: &DatasetSpec, master_seed: u64) -> Result<Vec<Dataset>> {
    if b == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    (0..b).map(|i| make_dataset_indexed(spec, master_seed, i)).collect()
}
