//! Training objectives over flat parameter vectors.
//!
//! * [`RolloutLoss`]: full-order MSE of a zero-state rollout plus `ρ‖θ‖²`.
//! * [`ReducedLoss`]: the same loss through the lift, over `φ` only.
//! * [`MetaLoss`]: batch mean of the encoder → lift → rollout test error,
//!   over `[γ; ψ]`.
//!
//! Signals handed to these types are expected to be scaled already.

use alloc::vec;
use alloc::vec::Vec;

use crate::archmods::{EncoderCache, EncoderLayout, Manifold, Rollout, SignalScaling, ThetaLayout};
use crate::boucwen::Dataset;
use crate::diffcore::Objective;
use crate::{Error, Result};

/// `dy_k = 2 (ŷ_k − y_k) / n_used` for counted samples, 0 before `n_skip`.
fn mse_adjoint(y: &[f64], y_hat: &[f64], n_skip: usize, dy: &mut [f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            what: "target sequence",
            expected: y_hat.len(),
            found: y.len(),
        });
    }
    if n_skip >= y.len() {
        return Err(Error::config("n_skip must be smaller than the sequence length"));
    }
    let n = (y.len() - n_skip) as f64;
    let mut acc = 0.0;
    dy[..n_skip].iter_mut().for_each(|v| *v = 0.0);
    for k in n_skip..y.len() {
        let e = y_hat[k] - y[k];
        acc += e * e;
        dy[k] = 2.0 * e / n;
    }
    Ok(acc / n)
}

fn mse_only(y: &[f64], y_hat: &[f64], n_skip: usize) -> Result<f64> {
    crate::metrics::mse_loss(y, y_hat, n_skip)
}

/// Full-order training loss on one record.
#[derive(Debug, Clone)]
pub struct RolloutLoss<'a> {
    pub lay: &'a ThetaLayout,
    pub u: &'a [f64],
    pub y: &'a [f64],
    pub n_skip: usize,
    pub rho: f64,
}

impl<'a> RolloutLoss<'a> {
    pub fn new(lay: &'a ThetaLayout, u: &'a [f64], y: &'a [f64], n_skip: usize, rho: f64) -> Result<Self> {
        if u.len() != y.len() * lay.cfg.n_u / lay.cfg.n_y {
            return Err(Error::DimensionMismatch {
                what: "training output",
                expected: u.len(),
                found: y.len(),
            });
        }
        if n_skip >= y.len() / lay.cfg.n_y {
            return Err(Error::config("n_skip must be smaller than the sequence length"));
        }
        Ok(Self { lay, u, y, n_skip, rho })
    }

    fn x0(&self) -> Vec<f64> {
        vec![0.0; self.lay.cfg.n_x]
    }

    fn skip(&self) -> usize {
        self.n_skip * self.lay.cfg.n_y
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        if self.rho == 0.0 {
            0.0
        } else {
            self.rho * theta.iter().map(|v| v * v).sum::<f64>()
        }
    }
}

impl Objective for RolloutLoss<'_> {
    fn dim(&self) -> usize {
        self.lay.total()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let r = Rollout::run(self.lay, theta, self.u, &self.x0())?;
        Ok(mse_only(self.y, &r.y, self.skip())? + self.penalty(theta))
    }

    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let r = Rollout::run(self.lay, theta, self.u, &self.x0())?;
        let mut dy = vec![0.0; r.y.len()];
        let mse = mse_adjoint(self.y, &r.y, self.skip(), &mut dy)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        r.backward(self.lay, theta, self.u, &dy, grad)?;
        if self.rho != 0.0 {
            for (g, t) in grad.iter_mut().zip(theta) {
                *g += 2.0 * self.rho * t;
            }
        }
        Ok(mse + self.penalty(theta))
    }
}

/// Training loss restricted to the manifold: `φ ↦ L(Vφ + θ_bias)`.
#[derive(Debug, Clone)]
pub struct ReducedLoss<'a> {
    pub inner: RolloutLoss<'a>,
    pub manifold: &'a Manifold,
}

impl<'a> ReducedLoss<'a> {
    pub fn new(inner: RolloutLoss<'a>, manifold: &'a Manifold) -> Result<Self> {
        if manifold.n_theta != inner.lay.total() {
            return Err(Error::DimensionMismatch {
                what: "manifold n_theta",
                expected: inner.lay.total(),
                found: manifold.n_theta,
            });
        }
        Ok(Self { inner, manifold })
    }

    fn theta(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut theta = vec![0.0; self.manifold.n_theta];
        self.manifold.lift_into(phi, &mut theta)?;
        Ok(theta)
    }
}

impl Objective for ReducedLoss<'_> {
    fn dim(&self) -> usize {
        self.manifold.n_phi
    }

    fn value(&self, phi: &[f64]) -> Result<f64> {
        self.inner.value(&self.theta(phi)?)
    }

    fn value_grad(&self, phi: &[f64], grad: &mut [f64]) -> Result<f64> {
        let theta = self.theta(phi)?;
        let mut gt = vec![0.0; theta.len()];
        let v = self.inner.value_grad(&theta, &mut gt)?;
        grad.copy_from_slice(&self.manifold.pullback(&gt));
        Ok(v)
    }
}

/// One meta-training record after signal scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaTask {
    pub u_tr: Vec<f64>,
    pub y_tr: Vec<f64>,
    pub u_te: Vec<f64>,
    pub y_te: Vec<f64>,
}

impl MetaTask {
    pub fn from_dataset(d: &Dataset, s: &SignalScaling) -> Self {
        Self {
            u_tr: s.scale_u(&d.u_tr.samples),
            y_tr: s.scale_y(&d.y_tr.samples),
            u_te: s.scale_u(&d.u_te.samples),
            y_te: s.scale_y(&d.y_te.samples),
        }
    }
}

/// Shapes shared by every meta-loss evaluation.
#[derive(Debug, Clone)]
pub struct MetaShapes {
    pub theta: ThetaLayout,
    pub encoder: EncoderLayout,
    pub n_phi: usize,
    pub n_skip: usize,
}

impl MetaShapes {
    pub fn new(theta: ThetaLayout, encoder: EncoderLayout, n_skip: usize) -> Result<Self> {
        let n_phi = encoder.cfg.n_phi;
        if n_phi == 0 || n_phi >= theta.total() {
            return Err(Error::config("manifold dimension must satisfy 0 < n_phi < n_theta"));
        }
        if theta.cfg.n_u != 1 || theta.cfg.n_y != 1 {
            return Err(Error::config("meta-learning assumes a single-input single-output base model"));
        }
        Ok(Self { theta, encoder, n_phi, n_skip })
    }

    pub fn gamma_len(&self) -> usize {
        Manifold::gamma_len(self.theta.total(), self.n_phi)
    }

    /// Length of the joint vector `[γ; ψ]`.
    pub fn dim(&self) -> usize {
        self.gamma_len() + self.encoder.total()
    }

    pub fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.gamma_len())
    }

    pub fn manifold(&self, gamma: &[f64]) -> Result<Manifold> {
        Manifold::from_gamma(self.theta.total(), self.n_phi, gamma)
    }
}

/// Loss of one record and, if `grad` is given, its gradient over `[γ; ψ]`
/// (overwritten, not accumulated).
pub fn meta_task_loss(
    sh: &MetaShapes,
    m: &Manifold,
    psi: &[f64],
    task: &MetaTask,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let enc = EncoderCache::run(&sh.encoder, psi, &task.u_tr, &task.y_tr)?;
    let mut theta = vec![0.0; m.n_theta];
    m.lift_into(&enc.phi, &mut theta)?;
    let x0 = vec![0.0; sh.theta.cfg.n_x];
    let r = Rollout::run(&sh.theta, &theta, &task.u_te, &x0)?;
    let Some(grad) = grad else {
        return mse_only(&task.y_te, &r.y, sh.n_skip);
    };
    let mut dy = vec![0.0; r.y.len()];
    let loss = mse_adjoint(&task.y_te, &r.y, sh.n_skip, &mut dy)?;
    let mut gt = vec![0.0; theta.len()];
    r.backward(&sh.theta, &theta, &task.u_te, &dy, &mut gt)?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (gg, gp) = grad.split_at_mut(sh.gamma_len());
    m.accumulate_gamma_grad(&enc.phi, &gt, gg);
    enc.backward(&sh.encoder, psi, &m.pullback(&gt), gp)?;
    Ok(loss)
}

/// Batch-mean composite loss over a fixed set of records, evaluated
/// sequentially in index order.
#[derive(Debug, Clone)]
pub struct MetaLoss<'a> {
    pub shapes: &'a MetaShapes,
    pub tasks: &'a [MetaTask],
}

impl Objective for MetaLoss<'_> {
    fn dim(&self) -> usize {
        self.shapes.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (gamma, psi) = self.shapes.split(x);
        let m = self.shapes.manifold(gamma)?;
        let mut acc = 0.0;
        for t in self.tasks {
            acc += meta_task_loss(self.shapes, &m, psi, t, None)?;
        }
        Ok(acc / self.tasks.len() as f64)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (gamma, psi) = self.shapes.split(x);
        let m = self.shapes.manifold(gamma)?;
        let b = self.tasks.len() as f64;
        let mut acc = 0.0;
        let mut gi = vec![0.0; x.len()];
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in self.tasks {
            acc += meta_task_loss(self.shapes, &m, psi, t, Some(&mut gi))?;
            for (g, d) in grad.iter_mut().zip(&gi) {
                *g += d / b;
            }
        }
        Ok(acc / b)
    }
}
