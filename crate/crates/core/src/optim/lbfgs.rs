use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::diffcore::Objective;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsConfig {
    pub memory: usize,
    /// Keep every curvature pair (dense BFGS behaviour).
    pub full_memory: bool,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    /// Stop when `‖∇f‖∞ ≤ grad_tol`.
    pub grad_tol: f64,
    /// Function evaluations allowed per line search.
    pub max_ls_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            full_memory: false,
            max_iters: 1000,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-10,
            max_ls_evals: 40,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::config("Wolfe constants must satisfy 0 < c1 < c2 < 1"));
        }
        if self.memory == 0 {
            return Err(Error::config("L-BFGS memory must be at least 1"));
        }
        if !(self.grad_tol >= 0.0) || self.max_ls_evals == 0 {
            return Err(Error::config("invalid L-BFGS tolerances"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub status: LbfgsStatus,
    pub iterations: usize,
    pub evaluations: usize,
    /// Loss after each accepted step, starting with `f(x0)`.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe<'a, O> {
    f: &'a O,
    x: &'a [f64],
    d: &'a [f64],
    evals: usize,
    xt: Vec<f64>,
    gt: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Sample {
    a: f64,
    f: f64,
    dg: f64,
}

impl<O: Objective> Probe<'_, O> {
    /// Non-finite or failing evaluations come back as `f = +∞`.
    fn eval(&mut self, a: f64) -> Sample {
        self.evals += 1;
        for i in 0..self.x.len() {
            self.xt[i] = self.x[i] + a * self.d[i];
        }
        match self.f.value_grad(&self.xt, &mut self.gt) {
            Ok(v) if v.is_finite() && self.gt.iter().all(|g| g.is_finite()) => Sample { a, f: v, dg: dot(&self.gt, self.d) },
            _ => Sample { a, f: f64::INFINITY, dg: f64::NAN },
        }
    }
}

/// Minimizer of the cubic through two samples, if it lies inside them.
fn cubic_min(lo: Sample, hi: Sample) -> Option<f64> {
    if !hi.f.is_finite() || !hi.dg.is_finite() {
        return None;
    }
    let d1 = lo.dg + hi.dg - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
    let rad = d1 * d1 - lo.dg * hi.dg;
    if rad < 0.0 {
        return None;
    }
    let d2 = (hi.a - lo.a).signum() * rad.sqrt();
    let a = hi.a - (hi.a - lo.a) * (hi.dg + d2 - d1) / (hi.dg - lo.dg + 2.0 * d2);
    a.is_finite().then_some(a)
}

/// Strong-Wolfe line search; `None` when no acceptable step was found.
fn line_search<O: Objective>(p: &mut Probe<'_, O>, f0: f64, dg0: f64, a_init: f64, c: &LbfgsConfig) -> Option<Sample> {
    let s0 = Sample { a: 0.0, f: f0, dg: dg0 };
    let accept = |s: &Sample| s.f <= f0 + c.c1 * s.a * dg0;
    let curv = |s: &Sample| s.dg.abs() <= -c.c2 * dg0;

    let mut prev = s0;
    let mut a = a_init;
    let (mut lo, mut hi);
    loop {
        let s = p.eval(a);
        if !accept(&s) || (prev.a > 0.0 && s.f >= prev.f) {
            lo = prev;
            hi = s;
            break;
        }
        if curv(&s) {
            return Some(s);
        }
        if s.dg >= 0.0 {
            lo = s;
            hi = prev;
            break;
        }
        if p.evals >= c.max_ls_evals {
            return None;
        }
        prev = s;
        a *= 2.0;
    }

    while p.evals < c.max_ls_evals {
        let width = hi.a - lo.a;
        if width.abs() <= 1e-16 * lo.a.abs().max(1e-300) {
            break;
        }
        let (left, right) = if width > 0.0 { (lo.a, hi.a) } else { (hi.a, lo.a) };
        let margin = 0.01 * width.abs();
        let a = match cubic_min(lo, hi) {
            Some(t) if t > left + margin && t < right - margin => t,
            _ => 0.5 * (lo.a + hi.a),
        };
        let s = p.eval(a);
        if !accept(&s) || s.f >= lo.f {
            hi = s;
        } else {
            if curv(&s) {
                return Some(s);
            }
            if s.dg * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = s;
        }
    }
    (lo.a > 0.0).then_some(lo)
}

/// L-BFGS with two-loop recursion. Never raises on numerical trouble:
/// the best iterate so far is returned with a status.
pub fn lbfgs_minimize(f: &impl Objective, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsOutcome> {
    cfg.validate()?;
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch { what: "initial point", expected: f.dim(), found: x0.len() });
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f.value_grad(&x, &mut g)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective at the initial point"));
    }
    let mem = if cfg.full_memory { cfg.max_iters.max(1) } else { cfg.memory };
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(mem);
    let mut trace = vec![fx];
    let mut evals = 1;
    let mut d = vec![0.0; n];
    let mut alpha = vec![0.0; mem];
    let mut status = LbfgsStatus::MaxIters;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if norm_inf(&g) <= cfg.grad_tol {
            status = LbfgsStatus::Converged;
            break;
        }
        // Two-loop recursion: d = −H g.
        d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
        for (j, (s, y, rho)) in pairs.iter().enumerate().rev() {
            alpha[j] = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= alpha[j] * yi);
        }
        let scale = match pairs.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / norm_inf(&g).max(1.0),
        };
        d.iter_mut().for_each(|v| *v *= scale);
        for (j, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (alpha[j] - b) * si);
        }
        let mut dg0 = dot(&g, &d);
        if !(dg0 < 0.0) {
            pairs.clear();
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi / norm_inf(&g).max(1.0));
            dg0 = dot(&g, &d);
        }

        let mut probe = Probe { f, x: &x, d: &d, evals: 0, xt: vec![0.0; n], gt: vec![0.0; n] };
        let found = line_search(&mut probe, fx, dg0, 1.0, cfg);
        evals += probe.evals;
        let Some(step) = found else {
            status = LbfgsStatus::LineSearchFailed;
            break;
        };
        // Re-evaluate at the accepted point so x, f and g stay consistent.
        let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step.a * di).collect();
        let mut g_new = vec![0.0; n];
        let f_new = f.value_grad(&x_new, &mut g_new)?;
        evals += 1;
        iterations += 1;
        if !(f_new <= fx) {
            status = LbfgsStatus::LineSearchFailed;
            break;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy.is_finite() {
            if pairs.len() == mem {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        g = g_new;
        fx = f_new;
        trace.push(fx);
    }
    if status == LbfgsStatus::MaxIters && norm_inf(&g) <= cfg.grad_tol {
        status = LbfgsStatus::Converged;
    }
    Ok(LbfgsOutcome { x, f: fx, status, iterations, evaluations: evals, trace })
}
