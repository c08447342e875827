use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{TracePoint, DIVERGENCE_FACTOR};
use crate::diffcore::Objective;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr_init: f64,
    pub lr_final: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled: `x ← x (1 − lr·wd)` before each Adam step.
    pub weight_decay: f64,
    pub total_iters: usize,
    pub schedule: Schedule,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_init: 1e-3,
            lr_final: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            total_iters: 1000,
            schedule: Schedule::Constant,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let betas_ok = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        if !betas_ok {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("Adam eps must be positive"));
        }
        // lr = 0 is allowed: it freezes the parameters.
        if !(self.lr_final >= 0.0 && self.lr_init >= self.lr_final && self.lr_init.is_finite()) {
            return Err(Error::config("learning rates must satisfy lr_init >= lr_final >= 0"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight decay must be non-negative"));
        }
        Ok(())
    }

    pub fn lr_at(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr_init,
            Schedule::Cosine => cosine_lr(t, self),
        }
    }
}

/// `lr_final + ½ (lr_init − lr_final)(1 + cos(π t / T))`, clamped at `t = T`.
pub fn cosine_lr(t: usize, cfg: &AdamConfig) -> f64 {
    if cfg.total_iters == 0 {
        return cfg.lr_init;
    }
    let frac = t.min(cfg.total_iters) as f64 / cfg.total_iters as f64;
    cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + (core::f64::consts::PI * frac).cos())
}

/// Adam moment state; usable directly when gradients come from elsewhere.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 })
    }

    /// One decoupled-decay Adam update with learning rate `lr`.
    pub fn step(&mut self, x: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps, weight_decay, .. } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t);
        let bc2 = 1.0 - beta2.powi(self.t);
        let decay = 1.0 - lr * weight_decay;
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            if weight_decay != 0.0 {
                x[i] *= decay;
            }
            x[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamOutcome {
    pub x: Vec<f64>,
    /// Loss at each iterate before its update.
    pub trace: Vec<TracePoint>,
}

/// Runs `cfg.total_iters` AdamW steps. `eval(iter, x, grad)` writes the
/// gradient and returns the loss; it may resample data per iteration.
pub fn adamw_run_with<F>(x0: &[f64], cfg: &AdamConfig, mut eval: F) -> Result<AdamOutcome>
where
    F: FnMut(usize, &[f64], &mut [f64]) -> Result<f64>,
{
    let mut opt = Adam::new(*cfg, x0.len())?;
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut trace = Vec::with_capacity(cfg.total_iters);
    let mut first = None;
    for it in 0..cfg.total_iters {
        let loss = eval(it, &x, &mut g).map_err(|_| Error::OptimizerAborted {
            iteration: it,
            reason: "loss evaluation failed",
        })?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::OptimizerAborted { iteration: it, reason: "non-finite loss" });
        }
        let l0 = *first.get_or_insert(loss);
        if loss > DIVERGENCE_FACTOR * l0 {
            return Err(Error::OptimizerAborted { iteration: it, reason: "loss exceeded 1e6 times its initial value" });
        }
        let lr = cfg.lr_at(it);
        trace.push(TracePoint { iter: it, lr, loss });
        opt.step(&mut x, &g, lr);
    }
    Ok(AdamOutcome { x, trace })
}

pub fn adamw_run(f: &impl Objective, x0: &[f64], cfg: &AdamConfig) -> Result<AdamOutcome> {
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch { what: "initial point", expected: f.dim(), found: x0.len() });
    }
    adamw_run_with(x0, cfg, |_, x, g| f.value_grad(x, g))
}
