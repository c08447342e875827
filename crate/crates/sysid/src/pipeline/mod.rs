//! End-to-end procedures: full-order and reduced training, the linear
//! baseline, meta-training, Monte Carlo studies and the Hessian spectrum.

mod hessian;
mod meta;
mod study;
mod train;

use manifold_sysid_core::metrics::MetricsReport;
use serde::{Deserialize, Serialize};

pub use hessian::{hessian_spectrum, HessianReport};
pub use meta::{meta_train, MetaOutcome};
pub use study::{mc_study, nominal_record, window};
pub use train::{
    evaluate, train_full, train_full_from, train_linear_baseline, train_reduced, ReducedOutcome, TrainOutcome,
};

use crate::config::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// First-order budget spent, no quasi-Newton stage.
    Completed,
    Converged,
    MaxIters,
    LineSearchFailed,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::LineSearchFailed => "line_search_failed",
            RunStatus::Diverged => "diverged",
        }
    }

    pub fn failed(self) -> bool {
        self == RunStatus::Diverged
    }
}

/// Outcome of one training run, evaluated on the test portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: Mode,
    pub l: usize,
    pub run: usize,
    /// `None` when the run failed.
    pub metrics: Option<MetricsReport>,
    pub train_loss: Option<f64>,
    pub wall_time_s: f64,
    pub status: RunStatus,
    pub seed: u64,
    pub master_seed: u64,
    pub config_hash: String,
}

impl FitResult {
    pub fn fit_percent(&self) -> f64 {
        self.metrics.map_or(f64::NAN, |m| m.fit_percent)
    }

    pub fn rmse(&self) -> f64 {
        self.metrics.map_or(f64::NAN, |m| m.rmse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    Quartiles { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mode: Mode,
    pub l: usize,
    pub n_runs: usize,
    pub n_failed: usize,
    pub fit: Quartiles,
    pub rmse: Quartiles,
}

/// Per-(mode, L) statistics over successful runs, ordered by mode then L.
pub fn aggregate(results: &[FitResult]) -> Vec<Aggregate> {
    let mut groups: std::collections::BTreeMap<(Mode, usize), Vec<&FitResult>> = Default::default();
    for r in results {
        groups.entry((r.mode, r.l)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((mode, l), rs)| {
            let fits: Vec<f64> = rs.iter().map(|r| r.fit_percent()).collect();
            let rmses: Vec<f64> = rs.iter().map(|r| r.rmse()).collect();
            Aggregate {
                mode,
                l,
                n_runs: rs.len(),
                n_failed: rs.iter().filter(|r| r.metrics.is_none()).count(),
                fit: quartiles(&fits),
                rmse: quartiles(&rmses),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_examples() {
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0, f64::NAN]);
        assert_eq!(q.median, 2.5);
        assert_eq!(q.q1, 1.75);
        assert_eq!(q.q3, 3.25);
        assert!(quartiles(&[]).median.is_nan());
        assert_eq!(quartiles(&[7.0]).q1, 7.0);
    }
}
