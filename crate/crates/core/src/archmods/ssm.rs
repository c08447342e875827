//! Neural state-space base model
//!
//! ```text
//! x[k+1] = A x[k] + B u[k] + N_f(x[k], u[k])
//! y[k]   = C x[k] + N_g(x[k])
//! ```
//!
//! `N_f`, `N_g` are one-hidden-layer tanh networks with biased affine layers.
//! Parameters are stored flat in the order
//! `f.w1 f.b1 f.w2 f.b2 g.w1 g.b1 g.w2 g.b2 A B C`, every matrix row-major.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::kernels::{matvec_acc, matvec_t_acc, outer_acc};
use super::layout::Layout;
use crate::signals::Signal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsmConfig {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub hidden_f: usize,
    pub hidden_g: usize,
}

impl Default for SsmConfig {
    fn default() -> Self {
        Self {
            n_x: 3,
            n_u: 1,
            n_y: 1,
            hidden_f: 16,
            hidden_g: 16,
        }
    }
}

impl SsmConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.n_x, self.n_u, self.n_y, self.hidden_f, self.hidden_g].contains(&0) {
            return Err(Error::config("state-space dimensions must be positive"));
        }
        Ok(())
    }
}

pub fn theta_count(cfg: &SsmConfig) -> usize {
    let (nx, nu, ny, hf, hg) = (cfg.n_x, cfg.n_u, cfg.n_y, cfg.hidden_f, cfg.hidden_g);
    (nx + nu) * hf + hf + hf * nx + nx + nx * hg + hg + hg * ny + ny + nx * nx + nx * nu + ny * nx
}

/// Segment table of θ plus cached block ranges for the rollout kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaLayout {
    pub cfg: SsmConfig,
    layout: Layout,
    f_w1: Range<usize>,
    f_b1: Range<usize>,
    f_w2: Range<usize>,
    f_b2: Range<usize>,
    g_w1: Range<usize>,
    g_b1: Range<usize>,
    g_w2: Range<usize>,
    g_b2: Range<usize>,
    a: Range<usize>,
    b: Range<usize>,
    c: Range<usize>,
}

impl ThetaLayout {
    pub fn new(cfg: SsmConfig) -> Result<Self> {
        cfg.validate()?;
        let (nx, nu, ny, hf, hg) = (cfg.n_x, cfg.n_u, cfg.n_y, cfg.hidden_f, cfg.hidden_g);
        let layout = Layout::builder()
            .weight("f.w1", hf, nx + nu)
            .bias("f.b1", hf)
            .weight("f.w2", nx, hf)
            .bias("f.b2", nx)
            .weight("g.w1", hg, nx)
            .bias("g.b1", hg)
            .weight("g.w2", ny, hg)
            .bias("g.b2", ny)
            .weight("A", nx, nx)
            .weight("B", nx, nu)
            .weight("C", ny, nx)
            .build();
        let r = |n: &str| layout.range_of(n);
        Ok(Self {
            f_w1: r("f.w1"),
            f_b1: r("f.b1"),
            f_w2: r("f.w2"),
            f_b2: r("f.b2"),
            g_w1: r("g.w1"),
            g_b1: r("g.b1"),
            g_w2: r("g.w2"),
            g_b2: r("g.b2"),
            a: r("A"),
            b: r("B"),
            c: r("C"),
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

    /// Indices of the linear blocks `A`, `B`, `C`.
    pub fn linear_indices(&self) -> Vec<usize> {
        self.a.clone().chain(self.b.clone()).chain(self.c.clone()).collect()
    }

    fn check(&self, theta: &[f64], u_len: usize, x0: &[f64]) -> Result<usize> {
        if theta.len() != self.total() {
            return Err(Error::DimensionMismatch {
                what: "theta",
                expected: self.total(),
                found: theta.len(),
            });
        }
        if x0.len() != self.cfg.n_x {
            return Err(Error::DimensionMismatch {
                what: "initial state",
                expected: self.cfg.n_x,
                found: x0.len(),
            });
        }
        if u_len == 0 || u_len % self.cfg.n_u != 0 {
            return Err(Error::config("input length must be a positive multiple of n_u"));
        }
        Ok(u_len / self.cfg.n_u)
    }
}

/// Forward trajectory kept for the adjoint sweep.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub steps: usize,
    /// Predicted outputs, `steps × n_y`.
    pub y: Vec<f64>,
    xs: Vec<f64>,
    hf: Vec<f64>,
    hg: Vec<f64>,
}

impl Rollout {
    /// Simulates the model from `x0`; `u` is `steps × n_u` interleaved.
    pub fn run(lay: &ThetaLayout, theta: &[f64], u: &[f64], x0: &[f64]) -> Result<Self> {
        let n = lay.check(theta, u.len(), x0)?;
        let SsmConfig { n_x, n_u, n_y, hidden_f, hidden_g } = lay.cfg;
        let (fw1, fb1, fw2, fb2) = (
            &theta[lay.f_w1.clone()],
            &theta[lay.f_b1.clone()],
            &theta[lay.f_w2.clone()],
            &theta[lay.f_b2.clone()],
        );
        let (gw1, gb1, gw2, gb2) = (
            &theta[lay.g_w1.clone()],
            &theta[lay.g_b1.clone()],
            &theta[lay.g_w2.clone()],
            &theta[lay.g_b2.clone()],
        );
        let (a, b, c) = (&theta[lay.a.clone()], &theta[lay.b.clone()], &theta[lay.c.clone()]);

        let mut xs = vec![0.0; n * n_x];
        let mut hf = vec![0.0; n * hidden_f];
        let mut hg = vec![0.0; n * hidden_g];
        let mut y = vec![0.0; n * n_y];
        let mut x = x0.to_vec();
        let mut zin = vec![0.0; n_x + n_u];
        let mut next = vec![0.0; n_x];

        for k in 0..n {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    what: "state-space rollout",
                    index: k,
                });
            }
            xs[k * n_x..(k + 1) * n_x].copy_from_slice(&x);
            let uk = &u[k * n_u..(k + 1) * n_u];

            let hgk = &mut hg[k * hidden_g..(k + 1) * hidden_g];
            hgk.copy_from_slice(gb1);
            matvec_acc(gw1, &x, hgk);
            hgk.iter_mut().for_each(|v| *v = v.tanh());
            let yk = &mut y[k * n_y..(k + 1) * n_y];
            yk.copy_from_slice(gb2);
            matvec_acc(c, &x, yk);
            matvec_acc(gw2, hgk, yk);

            zin[..n_x].copy_from_slice(&x);
            zin[n_x..].copy_from_slice(uk);
            let hfk = &mut hf[k * hidden_f..(k + 1) * hidden_f];
            hfk.copy_from_slice(fb1);
            matvec_acc(fw1, &zin, hfk);
            hfk.iter_mut().for_each(|v| *v = v.tanh());
            next.copy_from_slice(fb2);
            matvec_acc(a, &x, &mut next);
            matvec_acc(b, uk, &mut next);
            matvec_acc(fw2, hfk, &mut next);
            core::mem::swap(&mut x, &mut next);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                what: "state-space output",
                index: n - 1,
            });
        }
        Ok(Self { steps: n, y, xs, hf, hg })
    }

    /// Vector-Jacobian product: given `dy = ∂L/∂ŷ` (`steps × n_y`),
    /// accumulates `∂L/∂θ` into `grad` and returns `∂L/∂x0`.
    pub fn backward(
        &self,
        lay: &ThetaLayout,
        theta: &[f64],
        u: &[f64],
        dy: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        let SsmConfig { n_x, n_u, n_y, hidden_f, hidden_g } = lay.cfg;
        let n = self.steps;
        if dy.len() != n * n_y || grad.len() != theta.len() || u.len() != n * n_u {
            return Err(Error::DimensionMismatch {
                what: "rollout adjoint buffers",
                expected: n * n_y,
                found: dy.len(),
            });
        }
        let fw1 = &theta[lay.f_w1.clone()];
        let fw2 = &theta[lay.f_w2.clone()];
        let gw1 = &theta[lay.g_w1.clone()];
        let gw2 = &theta[lay.g_w2.clone()];
        let a = &theta[lay.a.clone()];
        let c = &theta[lay.c.clone()];

        let mut lam_next = vec![0.0; n_x];
        let mut lam = vec![0.0; n_x];
        let mut dpre_f = vec![0.0; hidden_f];
        let mut dpre_g = vec![0.0; hidden_g];
        let mut zin = vec![0.0; n_x + n_u];
        let mut dzin = vec![0.0; n_x + n_u];
        let mut next_live = false;

        for k in (0..n).rev() {
            let xk = &self.xs[k * n_x..(k + 1) * n_x];
            let uk = &u[k * n_u..(k + 1) * n_u];
            lam.iter_mut().for_each(|v| *v = 0.0);

            if next_live {
                let hfk = &self.hf[k * hidden_f..(k + 1) * hidden_f];
                outer_acc(&lam_next, xk, &mut grad[lay.a.clone()]);
                outer_acc(&lam_next, uk, &mut grad[lay.b.clone()]);
                for (g, l) in grad[lay.f_b2.clone()].iter_mut().zip(&lam_next) {
                    *g += l;
                }
                outer_acc(&lam_next, hfk, &mut grad[lay.f_w2.clone()]);
                dpre_f.iter_mut().for_each(|v| *v = 0.0);
                matvec_t_acc(fw2, &lam_next, &mut dpre_f);
                for (d, h) in dpre_f.iter_mut().zip(hfk) {
                    *d *= 1.0 - h * h;
                }
                zin[..n_x].copy_from_slice(xk);
                zin[n_x..].copy_from_slice(uk);
                outer_acc(&dpre_f, &zin, &mut grad[lay.f_w1.clone()]);
                for (g, d) in grad[lay.f_b1.clone()].iter_mut().zip(&dpre_f) {
                    *g += d;
                }
                matvec_t_acc(a, &lam_next, &mut lam);
                dzin.iter_mut().for_each(|v| *v = 0.0);
                matvec_t_acc(fw1, &dpre_f, &mut dzin);
                for (l, d) in lam.iter_mut().zip(&dzin[..n_x]) {
                    *l += d;
                }
            }

            let ey = &dy[k * n_y..(k + 1) * n_y];
            if ey.iter().any(|v| *v != 0.0) {
                let hgk = &self.hg[k * hidden_g..(k + 1) * hidden_g];
                outer_acc(ey, xk, &mut grad[lay.c.clone()]);
                for (g, e) in grad[lay.g_b2.clone()].iter_mut().zip(ey) {
                    *g += e;
                }
                outer_acc(ey, hgk, &mut grad[lay.g_w2.clone()]);
                dpre_g.iter_mut().for_each(|v| *v = 0.0);
                matvec_t_acc(gw2, ey, &mut dpre_g);
                for (d, h) in dpre_g.iter_mut().zip(hgk) {
                    *d *= 1.0 - h * h;
                }
                outer_acc(&dpre_g, xk, &mut grad[lay.g_w1.clone()]);
                for (g, d) in grad[lay.g_b1.clone()].iter_mut().zip(&dpre_g) {
                    *g += d;
                }
                matvec_t_acc(c, ey, &mut lam);
                matvec_t_acc(gw1, &dpre_g, &mut lam);
            }

            core::mem::swap(&mut lam, &mut lam_next);
            next_live = next_live || ey.iter().any(|v| *v != 0.0);
        }
        Ok(lam_next)
    }
}

/// Output sequence of the model for a flat multichannel input.
pub fn rollout(lay: &ThetaLayout, theta: &[f64], u: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
    Ok(Rollout::run(lay, theta, u, x0)?.y)
}

/// Single-input single-output convenience wrapper over [`rollout`].
pub fn ssm_forward(lay: &ThetaLayout, theta: &[f64], u: &Signal, x0: &[f64]) -> Result<Signal> {
    if lay.cfg.n_u != 1 || lay.cfg.n_y != 1 {
        return Err(Error::config("ssm_forward on a Signal needs n_u = n_y = 1"));
    }
    let y = rollout(lay, theta, &u.samples, x0)?;
    Signal::new(y, u.fs)
}
