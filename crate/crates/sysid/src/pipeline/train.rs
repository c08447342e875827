use std::time::Instant;

use manifold_sysid_core::archmods::{
    encode, init_ssm, rollout, EncoderLayout, Manifold, ThetaLayout,
};
use manifold_sysid_core::boucwen::Dataset;
use manifold_sysid_core::diffcore::{Objective, Subspace};
use manifold_sysid_core::losses::{ReducedLoss, RolloutLoss};
use manifold_sysid_core::metrics::{default_n_skip, MetricsReport};
use manifold_sysid_core::optim::{adamw_run, lbfgs_minimize, LbfgsStatus, TracePoint};
use manifold_sysid_core::rng::rng_from_seed;
use manifold_sysid_core::Error as CoreError;

use super::{FitResult, RunStatus};
use crate::config::{FullConfig, Mode, ModelConfig, ReducedConfig};
use crate::error::{Result, SysidError};

/// Optimizer output before test evaluation.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    pub status: RunStatus,
    pub train_loss: Option<f64>,
    pub adam_trace: Vec<TracePoint>,
    pub lbfgs_trace: Vec<TracePoint>,
    pub result: FitResult,
}

#[derive(Debug, Clone)]
pub struct ReducedOutcome {
    pub phi0: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub result: FitResult,
}

fn blank_result(mode: Mode, l: usize, seed: u64) -> FitResult {
    FitResult {
        mode,
        l,
        run: 0,
        metrics: None,
        train_loss: None,
        wall_time_s: 0.0,
        status: RunStatus::Completed,
        seed,
        master_seed: seed,
        config_hash: String::new(),
    }
}

/// Numerical breakdowns become a failed status; anything else propagates.
fn numerical(e: &CoreError) -> bool {
    matches!(e, CoreError::Diverged { .. } | CoreError::NonFinite(_) | CoreError::OptimizerAborted { .. })
}

/// Test-portion metrics of θ, in the dataset's physical units.
pub fn evaluate(model: &ModelConfig, theta: &[f64], d: &Dataset) -> Result<MetricsReport> {
    let lay = ThetaLayout::new(model.ssm)?;
    let u = model.scaling.scale_u(&d.u_te.samples);
    let y_hat = model.scaling.unscale_y(&rollout(&lay, theta, &u, &vec![0.0; lay.cfg.n_x])?);
    Ok(MetricsReport::compute(&d.y_te.samples, &y_hat, default_n_skip(d.y_te.len()))?)
}

struct Scaled {
    u: Vec<f64>,
    y: Vec<f64>,
    n_skip: usize,
}

fn scaled_train(model: &ModelConfig, d: &Dataset, n_skip: Option<usize>) -> Result<Scaled> {
    d.validate()?;
    let n = d.u_tr.len();
    let n_skip = n_skip.unwrap_or_else(|| default_n_skip(n));
    if n_skip >= n {
        return Err(SysidError::config("n_skip must be smaller than the training length"));
    }
    Ok(Scaled { u: model.scaling.scale_u(&d.u_tr.samples), y: model.scaling.scale_y(&d.y_tr.samples), n_skip })
}

/// AdamW then L-BFGS on `f`, starting at `x0`.
fn two_stage(f: &impl Objective, x0: Vec<f64>, cfg: &FullConfig) -> Result<(Vec<f64>, RunStatus, Option<f64>, Vec<TracePoint>, Vec<TracePoint>)> {
    let adam = match adamw_run(f, &x0, &cfg.adam) {
        Ok(a) => a,
        Err(e) if numerical(&e) => return Ok((x0, RunStatus::Diverged, None, Vec::new(), Vec::new())),
        Err(e) => return Err(e.into()),
    };
    if cfg.lbfgs.max_iters == 0 {
        let loss = match f.value(&adam.x) {
            Ok(v) if v.is_finite() => Some(v),
            _ => return Ok((adam.x, RunStatus::Diverged, None, adam.trace, Vec::new())),
        };
        return Ok((adam.x, RunStatus::Completed, loss, adam.trace, Vec::new()));
    }
    let lb = match lbfgs_minimize(f, &adam.x, &cfg.lbfgs) {
        Ok(o) => o,
        Err(e) if numerical(&e) => return Ok((adam.x, RunStatus::Diverged, None, adam.trace, Vec::new())),
        Err(e) => return Err(e.into()),
    };
    let status = match lb.status {
        LbfgsStatus::Converged => RunStatus::Converged,
        LbfgsStatus::MaxIters => RunStatus::MaxIters,
        LbfgsStatus::LineSearchFailed => RunStatus::LineSearchFailed,
    };
    let trace = lb.trace.iter().enumerate().map(|(i, &loss)| TracePoint { iter: i, lr: 0.0, loss }).collect();
    Ok((lb.x, status, Some(lb.f), adam.trace, trace))
}

fn finish(mode: Mode, model: &ModelConfig, d: &Dataset, seed: u64, start: Instant, staged: (Vec<f64>, RunStatus, Option<f64>, Vec<TracePoint>, Vec<TracePoint>)) -> Result<TrainOutcome> {
    let (theta, mut status, train_loss, adam_trace, lbfgs_trace) = staged;
    let mut result = blank_result(mode, d.u_tr.len(), seed);
    if !status.failed() {
        match evaluate(model, &theta, d) {
            Ok(m) => result.metrics = Some(m),
            Err(SysidError::Core(e)) if numerical(&e) => status = RunStatus::Diverged,
            Err(e) => return Err(e),
        }
    }
    result.status = status;
    result.train_loss = train_loss;
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(TrainOutcome { theta, status, train_loss, adam_trace, lbfgs_trace, result })
}

/// Full-order training from a given initial θ.
pub fn train_full_from(d: &Dataset, model: &ModelConfig, cfg: &FullConfig, theta0: Vec<f64>, seed: u64) -> Result<TrainOutcome> {
    let start = Instant::now();
    let lay = ThetaLayout::new(model.ssm)?;
    let s = scaled_train(model, d, cfg.n_skip)?;
    let loss = RolloutLoss::new(&lay, &s.u, &s.y, s.n_skip, cfg.rho)?;
    if theta0.len() != lay.total() {
        return Err(CoreError::DimensionMismatch { what: "initial theta", expected: lay.total(), found: theta0.len() }.into());
    }
    let staged = two_stage(&loss, theta0, cfg)?;
    finish(Mode::Full, model, d, seed, start, staged)
}

/// Full-order training from the seeded default initialization.
pub fn train_full(d: &Dataset, model: &ModelConfig, cfg: &FullConfig, seed: u64) -> Result<TrainOutcome> {
    let lay = ThetaLayout::new(model.ssm)?;
    let theta0 = init_ssm(&lay, &mut rng_from_seed(seed));
    train_full_from(d, model, cfg, theta0, seed)
}

/// Fits only `A, B, C`; both neural blocks stay at zero.
pub fn train_linear_baseline(d: &Dataset, model: &ModelConfig, cfg: &FullConfig, seed: u64) -> Result<TrainOutcome> {
    let start = Instant::now();
    let lay = ThetaLayout::new(model.ssm)?;
    let s = scaled_train(model, d, cfg.n_skip)?;
    let init = init_ssm(&lay, &mut rng_from_seed(seed));
    let free = lay.linear_indices();
    let mut base = vec![0.0; lay.total()];
    for &i in &free {
        base[i] = init[i];
    }
    let loss = RolloutLoss::new(&lay, &s.u, &s.y, s.n_skip, cfg.rho)?;
    let sub = Subspace::new(loss, base, free)?;
    let x0 = sub.restrict(&sub.base);
    let (x, status, train_loss, at, lt) = two_stage(&sub, x0, cfg)?;
    let theta = sub.embed(&x);
    finish(Mode::Linear, model, d, seed, start, (theta, status, train_loss, at, lt))
}

/// Adapts only the manifold coordinates, starting from the encoder's guess.
pub fn train_reduced(
    d: &Dataset,
    model: &ModelConfig,
    m: &Manifold,
    enc: &EncoderLayout,
    psi: &[f64],
    cfg: &ReducedConfig,
    seed: u64,
) -> Result<ReducedOutcome> {
    let start = Instant::now();
    let lay = ThetaLayout::new(model.ssm)?;
    if m.n_theta != lay.total() {
        return Err(CoreError::DimensionMismatch { what: "manifold n_theta", expected: lay.total(), found: m.n_theta }.into());
    }
    if enc.cfg.n_phi != m.n_phi {
        return Err(CoreError::DimensionMismatch { what: "encoder output vs manifold n_phi", expected: m.n_phi, found: enc.cfg.n_phi }.into());
    }
    let s = scaled_train(model, d, cfg.n_skip)?;
    let phi0 = encode(enc, psi, &s.u, &s.y)?;
    let loss = ReducedLoss::new(RolloutLoss::new(&lay, &s.u, &s.y, s.n_skip, 0.0)?, m)?;
    let mut result = blank_result(Mode::Reduced, d.u_tr.len(), seed);
    let (phi, trace, mut status) = match adamw_run(&loss, &phi0, &cfg.adam) {
        Ok(o) => (o.x, o.trace, RunStatus::Completed),
        Err(e) if numerical(&e) => (phi0.clone(), Vec::new(), RunStatus::Diverged),
        Err(e) => return Err(e.into()),
    };
    let theta = manifold_sysid_core::archmods::lift(m, &phi)?;
    if !status.failed() {
        result.train_loss = loss.value(&phi).ok().filter(|v| v.is_finite());
        match evaluate(model, &theta, d) {
            Ok(r) => result.metrics = Some(r),
            Err(SysidError::Core(e)) if numerical(&e) => status = RunStatus::Diverged,
            Err(e) => return Err(e),
        }
    }
    result.status = status;
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(ReducedOutcome { phi0, phi, theta, trace, result })
}
