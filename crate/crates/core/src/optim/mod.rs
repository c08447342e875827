//! First-order and quasi-Newton minimizers over flat parameter vectors.

mod adam;
mod lbfgs;

pub use adam::{adamw_run, adamw_run_with, cosine_lr, Adam, AdamConfig, AdamOutcome, Schedule};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsOutcome, LbfgsStatus};

use serde::{Deserialize, Serialize};

/// One row of an optimizer trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Abort threshold relative to the initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
