//! Sequence-to-vector encoder: bidirectional GRU, time-average pooling,
//! and a `2 n_h → head_hidden (tanh) → n_φ (linear)` head.
//!
//! GRU convention (one bias per gate, update gate first):
//!
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! n = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! Flat layout: `fwd.{w_z,u_z,b_z,w_r,u_r,b_r,w_n,u_n,b_n}`, the same for
//! `bwd`, then `head.{w1,b1,w2,b2}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::kernels::{matvec_acc, matvec_t_acc, outer_acc};
use super::layout::{Layout, LayoutBuilder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub n_in: usize,
    pub n_h: usize,
    pub head_hidden: usize,
    pub n_phi: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_in: 2,
            n_h: 128,
            head_hidden: 128,
            n_phi: 20,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.n_in, self.n_h, self.head_hidden, self.n_phi].contains(&0) {
            return Err(Error::config("encoder dimensions must be positive"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let gru = 3 * (self.n_h * self.n_in + self.n_h * self.n_h + self.n_h);
        2 * gru + self.head_hidden * 2 * self.n_h + self.head_hidden + self.n_phi * self.head_hidden + self.n_phi
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GruRanges {
    w: [Range<usize>; 3],
    u: [Range<usize>; 3],
    b: [Range<usize>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayout {
    pub cfg: EncoderConfig,
    layout: Layout,
    dirs: [GruRanges; 2],
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
}

const GATES: [&str; 3] = ["z", "r", "n"];
const DIRS: [&str; 2] = ["fwd", "bwd"];

fn gru_segments(mut b: LayoutBuilder, dir: &str, cfg: &EncoderConfig) -> LayoutBuilder {
    for g in GATES {
        b = b
            .weight(&format!("{dir}.w_{g}"), cfg.n_h, cfg.n_in)
            .weight(&format!("{dir}.u_{g}"), cfg.n_h, cfg.n_h)
            .bias(&format!("{dir}.b_{g}"), cfg.n_h);
    }
    b
}

impl EncoderLayout {
    pub fn new(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let mut b = Layout::builder();
        for dir in DIRS {
            b = gru_segments(b, dir, &cfg);
        }
        let layout = b
            .weight("head.w1", cfg.head_hidden, 2 * cfg.n_h)
            .bias("head.b1", cfg.head_hidden)
            .weight("head.w2", cfg.n_phi, cfg.head_hidden)
            .bias("head.b2", cfg.n_phi)
            .build();
        let dir_ranges = |dir: &str| GruRanges {
            w: GATES.map(|g| layout.range_of(&format!("{dir}.w_{g}"))),
            u: GATES.map(|g| layout.range_of(&format!("{dir}.u_{g}"))),
            b: GATES.map(|g| layout.range_of(&format!("{dir}.b_{g}"))),
        };
        Ok(Self {
            dirs: [dir_ranges("fwd"), dir_ranges("bwd")],
            w1: layout.range_of("head.w1"),
            b1: layout.range_of("head.b1"),
            w2: layout.range_of("head.w2"),
            b2: layout.range_of("head.b2"),
            cfg,
            layout,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn total(&self) -> usize {
        self.layout.total()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-direction activations in processing order.
#[derive(Debug, Clone)]
struct GruTrace {
    /// `(N + 1) × n_h`, row 0 is the zero initial state.
    h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

/// Forward activations of one encoder evaluation.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    steps: usize,
    xs: Vec<f64>,
    traces: [GruTrace; 2],
    pub pooled: Vec<f64>,
    a1: Vec<f64>,
    pub phi: Vec<f64>,
}

impl EncoderCache {
    /// `u`, `y` are the (already scaled) training input and output.
    pub fn run(lay: &EncoderLayout, psi: &[f64], u: &[f64], y: &[f64]) -> Result<Self> {
        if lay.cfg.n_in != 2 {
            return Err(Error::config("encoder over (u, y) needs n_in = 2"));
        }
        if u.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "encoder output channel",
                expected: u.len(),
                found: y.len(),
            });
        }
        let xs: Vec<f64> = u.iter().zip(y).flat_map(|(&a, &b)| [a, b]).collect();
        Self::run_interleaved(lay, psi, xs)
    }

    /// `xs` holds `N × n_in` interleaved channels.
    pub fn run_interleaved(lay: &EncoderLayout, psi: &[f64], xs: Vec<f64>) -> Result<Self> {
        let cfg = lay.cfg;
        if psi.len() != lay.total() {
            return Err(Error::DimensionMismatch {
                what: "encoder parameters",
                expected: lay.total(),
                found: psi.len(),
            });
        }
        if xs.is_empty() || xs.len() % cfg.n_in != 0 {
            return Err(Error::config("encoder input must be a non-empty N × n_in sequence"));
        }
        let steps = xs.len() / cfg.n_in;
        let nh = cfg.n_h;
        let traces = [0, 1].map(|d| gru_forward(lay, psi, d, &xs, steps));

        let mut pooled = vec![0.0; 2 * nh];
        for (d, tr) in traces.iter().enumerate() {
            let out = &mut pooled[d * nh..(d + 1) * nh];
            for row in tr.h[nh..].chunks_exact(nh) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
            out.iter_mut().for_each(|v| *v /= steps as f64);
        }

        let mut a1 = psi[lay.b1.clone()].to_vec();
        matvec_acc(&psi[lay.w1.clone()], &pooled, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let mut phi = psi[lay.b2.clone()].to_vec();
        matvec_acc(&psi[lay.w2.clone()], &a1, &mut phi);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder output"));
        }
        Ok(Self { steps, xs, traces, pooled, a1, phi })
    }

    /// Accumulates `∂L/∂ψ` into `grad` given `dphi = ∂L/∂φ`.
    pub fn backward(&self, lay: &EncoderLayout, psi: &[f64], dphi: &[f64], grad: &mut [f64]) -> Result<()> {
        let cfg = lay.cfg;
        if dphi.len() != cfg.n_phi || grad.len() != lay.total() {
            return Err(Error::DimensionMismatch {
                what: "encoder adjoint buffers",
                expected: cfg.n_phi,
                found: dphi.len(),
            });
        }
        outer_acc(dphi, &self.a1, &mut grad[lay.w2.clone()]);
        for (g, d) in grad[lay.b2.clone()].iter_mut().zip(dphi) {
            *g += d;
        }
        let mut dpre = vec![0.0; cfg.head_hidden];
        matvec_t_acc(&psi[lay.w2.clone()], dphi, &mut dpre);
        for (d, a) in dpre.iter_mut().zip(&self.a1) {
            *d *= 1.0 - a * a;
        }
        outer_acc(&dpre, &self.pooled, &mut grad[lay.w1.clone()]);
        for (g, d) in grad[lay.b1.clone()].iter_mut().zip(&dpre) {
            *g += d;
        }
        let mut dpool = vec![0.0; 2 * cfg.n_h];
        matvec_t_acc(&psi[lay.w1.clone()], &dpre, &mut dpool);
        let scale = 1.0 / self.steps as f64;
        for d in 0..2 {
            let dmean: Vec<f64> = dpool[d * cfg.n_h..(d + 1) * cfg.n_h].iter().map(|v| v * scale).collect();
            gru_backward(lay, psi, d, &self.xs, self.steps, &self.traces[d], &dmean, grad);
        }
        Ok(())
    }
}

#[inline]
fn input_at(xs: &[f64], n_in: usize, steps: usize, dir: usize, t: usize) -> &[f64] {
    let idx = if dir == 0 { t } else { steps - 1 - t };
    &xs[idx * n_in..(idx + 1) * n_in]
}

fn gru_forward(lay: &EncoderLayout, psi: &[f64], dir: usize, xs: &[f64], steps: usize) -> GruTrace {
    let cfg = lay.cfg;
    let nh = cfg.n_h;
    let rg = &lay.dirs[dir];
    let mut tr = GruTrace {
        h: vec![0.0; (steps + 1) * nh],
        z: vec![0.0; steps * nh],
        r: vec![0.0; steps * nh],
        n: vec![0.0; steps * nh],
    };
    let mut rh = vec![0.0; nh];
    for t in 0..steps {
        let x = input_at(xs, cfg.n_in, steps, dir, t);
        let (hist, rest) = tr.h.split_at_mut((t + 1) * nh);
        let hp = &hist[t * nh..];
        let hn = &mut rest[..nh];

        let z = &mut tr.z[t * nh..(t + 1) * nh];
        z.copy_from_slice(&psi[rg.b[0].clone()]);
        matvec_acc(&psi[rg.w[0].clone()], x, z);
        matvec_acc(&psi[rg.u[0].clone()], hp, z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let r = &mut tr.r[t * nh..(t + 1) * nh];
        r.copy_from_slice(&psi[rg.b[1].clone()]);
        matvec_acc(&psi[rg.w[1].clone()], x, r);
        matvec_acc(&psi[rg.u[1].clone()], hp, r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        for ((o, a), b) in rh.iter_mut().zip(r.iter()).zip(hp) {
            *o = a * b;
        }
        let n = &mut tr.n[t * nh..(t + 1) * nh];
        n.copy_from_slice(&psi[rg.b[2].clone()]);
        matvec_acc(&psi[rg.w[2].clone()], x, n);
        matvec_acc(&psi[rg.u[2].clone()], &rh, n);
        n.iter_mut().for_each(|v| *v = v.tanh());

        for i in 0..nh {
            hn[i] = (1.0 - z[i]) * n[i] + z[i] * hp[i];
        }
    }
    tr
}

#[allow(clippy::too_many_arguments)]
fn gru_backward(
    lay: &EncoderLayout,
    psi: &[f64],
    dir: usize,
    xs: &[f64],
    steps: usize,
    tr: &GruTrace,
    dmean: &[f64],
    grad: &mut [f64],
) {
    let cfg = lay.cfg;
    let nh = cfg.n_h;
    let rg = &lay.dirs[dir];
    let mut dh = vec![0.0; nh];
    let mut dh_prev = vec![0.0; nh];
    let mut da = [vec![0.0; nh], vec![0.0; nh], vec![0.0; nh]];
    let mut drh = vec![0.0; nh];
    let mut rh = vec![0.0; nh];
    for t in (0..steps).rev() {
        for (d, m) in dh.iter_mut().zip(dmean) {
            *d += m;
        }
        let x = input_at(xs, cfg.n_in, steps, dir, t);
        let hp = &tr.h[t * nh..(t + 1) * nh];
        let z = &tr.z[t * nh..(t + 1) * nh];
        let r = &tr.r[t * nh..(t + 1) * nh];
        let n = &tr.n[t * nh..(t + 1) * nh];

        for i in 0..nh {
            let dn = dh[i] * (1.0 - z[i]);
            let dz = dh[i] * (hp[i] - n[i]);
            dh_prev[i] = dh[i] * z[i];
            da[2][i] = dn * (1.0 - n[i] * n[i]);
            da[0][i] = dz * z[i] * (1.0 - z[i]);
            rh[i] = r[i] * hp[i];
        }
        outer_acc(&da[2], &rh, &mut grad[rg.u[2].clone()]);
        drh.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(&psi[rg.u[2].clone()], &da[2], &mut drh);
        for i in 0..nh {
            let dr = drh[i] * hp[i];
            dh_prev[i] += drh[i] * r[i];
            da[1][i] = dr * r[i] * (1.0 - r[i]);
        }
        for g in 0..3 {
            outer_acc(&da[g], x, &mut grad[rg.w[g].clone()]);
            for (b, d) in grad[rg.b[g].clone()].iter_mut().zip(&da[g]) {
                *b += d;
            }
        }
        for g in 0..2 {
            outer_acc(&da[g], hp, &mut grad[rg.u[g].clone()]);
            matvec_t_acc(&psi[rg.u[g].clone()], &da[g], &mut dh_prev);
        }
        core::mem::swap(&mut dh, &mut dh_prev);
    }
}

/// Manifold coordinates for a training record.
pub fn encode(lay: &EncoderLayout, psi: &[f64], u: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(EncoderCache::run(lay, psi, u, y)?.phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archmods::init_encoder;
    use crate::diffcore::tape::{Tape, TapeObjective, Var};
    use crate::diffcore::value_and_grad;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn small() -> EncoderLayout {
        EncoderLayout::new(EncoderConfig { n_in: 2, n_h: 5, head_hidden: 4, n_phi: 3 }).unwrap()
    }

    fn random_seq(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let u = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        (u, y)
    }

    #[test]
    fn parameter_count_and_output_size() {
        let lay = EncoderLayout::new(EncoderConfig::default()).unwrap();
        assert_eq!(lay.total(), EncoderConfig::default().param_count());
        assert_eq!(lay.total(), 136_084);
        let psi = init_encoder(&lay, &mut rng_from_seed(0));
        let (u, y) = random_seq(20, 1);
        assert_eq!(encode(&lay, &psi, &u, &y).unwrap().len(), 20);
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let lay = small();
        let (u, y) = random_seq(12, 2);
        assert_eq!(encode(&lay, &vec![0.0; lay.total()], &u, &y).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let lay = small();
        let psi = vec![0.0; lay.total()];
        assert!(matches!(
            encode(&lay, &psi, &[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn time_reversal_swaps_directions() {
        let lay = small();
        let mut psi = init_encoder(&lay, &mut rng_from_seed(4));
        // Tie backward GRU weights to the forward ones.
        let half = lay.dirs[1].w[0].start;
        let (fwd, rest) = psi.split_at_mut(half);
        rest[..half].copy_from_slice(fwd);
        let (u, y) = random_seq(17, 5);
        let a = EncoderCache::run(&lay, &psi, &u, &y).unwrap();
        let ur: Vec<f64> = u.iter().rev().copied().collect();
        let yr: Vec<f64> = y.iter().rev().copied().collect();
        let b = EncoderCache::run(&lay, &psi, &ur, &yr).unwrap();
        let nh = lay.cfg.n_h;
        for i in 0..nh {
            assert!((a.pooled[i] - b.pooled[nh + i]).abs() < 1e-14);
            assert!((a.pooled[nh + i] - b.pooled[i]).abs() < 1e-14);
        }
        // A head that treats both halves alike makes φ itself invariant.
        let w1 = lay.w1.clone();
        for row in psi[w1].chunks_exact_mut(2 * nh) {
            let (l, r) = row.split_at_mut(nh);
            r.copy_from_slice(l);
        }
        let pa = encode(&lay, &psi, &u, &y).unwrap();
        let pb = encode(&lay, &psi, &ur, &yr).unwrap();
        for (x, z) in pa.iter().zip(&pb) {
            assert!((x - z).abs() < 1e-13);
        }
    }

    #[test]
    fn outputs_finite_on_random_inputs() {
        let lay = small();
        let psi = init_encoder(&lay, &mut rng_from_seed(6));
        let mut rng = rng_from_seed(7);
        for _ in 0..1000 {
            let n = 1 + (rng.random::<u32>() % 8) as usize;
            let u: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() - 0.5) * 1e6).collect();
            let y: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() - 0.5) * 1e6).collect();
            assert!(encode(&lay, &psi, &u, &y).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    fn tape_encoder<'t>(lay: &EncoderLayout, p: &[Var<'t>], t: &'t Tape, xs: &[[f64; 2]]) -> Vec<Var<'t>> {
        let cfg = lay.cfg;
        let nh = cfg.n_h;
        let n = xs.len();
        let mut pooled = Vec::new();
        for d in 0..2 {
            let rg = &lay.dirs[d];
            let mut h: Vec<Var<'t>> = (0..nh).map(|_| t.constant(0.0)).collect();
            let mut sum: Vec<Var<'t>> = (0..nh).map(|_| t.constant(0.0)).collect();
            for step in 0..n {
                let x = if d == 0 { xs[step] } else { xs[n - 1 - step] };
                let gate = |g: usize, hin: &[Var<'t>], i: usize| {
                    let mut s = p[rg.b[g].start + i];
                    for (j, xv) in x.iter().enumerate() {
                        s = s + p[rg.w[g].start + i * 2 + j] * *xv;
                    }
                    for j in 0..nh {
                        s = s + p[rg.u[g].start + i * nh + j] * hin[j];
                    }
                    s
                };
                let z: Vec<Var<'t>> = (0..nh).map(|i| gate(0, &h, i).sigmoid()).collect();
                let r: Vec<Var<'t>> = (0..nh).map(|i| gate(1, &h, i).sigmoid()).collect();
                let rh: Vec<Var<'t>> = (0..nh).map(|i| r[i] * h[i]).collect();
                let nn: Vec<Var<'t>> = (0..nh).map(|i| gate(2, &rh, i).tanh()).collect();
                h = (0..nh).map(|i| (1.0 - z[i]) * nn[i] + z[i] * h[i]).collect();
                sum = (0..nh).map(|i| sum[i] + h[i]).collect();
            }
            pooled.extend(sum.into_iter().map(|s| s / n as f64));
        }
        let a1: Vec<Var<'t>> = (0..cfg.head_hidden)
            .map(|i| {
                let mut s = p[lay.b1.start + i];
                for j in 0..2 * nh {
                    s = s + p[lay.w1.start + i * 2 * nh + j] * pooled[j];
                }
                s.tanh()
            })
            .collect();
        (0..cfg.n_phi)
            .map(|i| {
                let mut s = p[lay.b2.start + i];
                for j in 0..cfg.head_hidden {
                    s = s + p[lay.w2.start + i * cfg.head_hidden + j] * a1[j];
                }
                s
            })
            .collect()
    }

    #[test]
    fn adjoint_matches_tape() {
        let lay = small();
        let (u, y) = random_seq(9, 8);
        let xs: Vec<[f64; 2]> = u.iter().zip(&y).map(|(&a, &b)| [a, b]).collect();
        let weights = [0.7, -1.3, 0.4];
        let lay2 = lay.clone();
        let xs2 = xs.clone();
        let obj = TapeObjective::new(lay.total(), move |t: &Tape, p: &[Var]| {
            let phi = tape_encoder(&lay2, p, t, &xs2);
            let mut acc = t.constant(0.0);
            for (v, w) in phi.iter().zip(weights) {
                acc = acc + *v * w + *v * *v;
            }
            acc
        });
        for seed in 0..3 {
            let mut psi = init_encoder(&lay, &mut rng_from_seed(seed));
            let mut rng = rng_from_seed(50 + seed);
            psi.iter_mut().for_each(|v| *v += 0.2 * (rng.random::<f64>() - 0.5));
            let cache = EncoderCache::run(&lay, &psi, &u, &y).unwrap();
            let dphi: Vec<f64> = cache.phi.iter().zip(weights).map(|(v, w)| w + 2.0 * v).collect();
            let mut g = vec![0.0; lay.total()];
            cache.backward(&lay, &psi, &dphi, &mut g).unwrap();
            let (val, gt) = value_and_grad(&obj, &psi).unwrap();
            let direct: f64 = cache.phi.iter().zip(weights).map(|(v, w)| v * w + v * v).sum();
            assert!((val - direct).abs() < 1e-12);
            for i in 0..g.len() {
                assert!((g[i] - gt[i]).abs() <= 1e-12 * (1.0 + gt[i].abs()), "ψ[{i}]: {} vs {}", g[i], gt[i]);
            }
        }
    }
}
