use manifold_sysid_core::archmods::ThetaLayout;
use manifold_sysid_core::boucwen::Dataset;
use manifold_sysid_core::diffcore::{fd_hessian, sym_eig};
use manifold_sysid_core::losses::RolloutLoss;
use manifold_sysid_core::metrics::default_n_skip;

use crate::config::{FullConfig, ModelConfig};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct HessianReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
}

impl HessianReport {
    /// Share of eigenvalues with `|λ| < rel · max|λ|`.
    pub fn fraction_below(&self, rel: f64) -> f64 {
        let max = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let n = self.eigenvalues.iter().filter(|v| v.abs() < rel * max).count();
        n as f64 / self.eigenvalues.len().max(1) as f64
    }
}

/// Spectrum of the full-order training loss Hessian at θ, built column by
/// column from central differences of the exact gradient.
pub fn hessian_spectrum(theta: &[f64], d: &Dataset, model: &ModelConfig, cfg: &FullConfig, h: f64) -> Result<HessianReport> {
    let lay = ThetaLayout::new(model.ssm)?;
    let u = model.scaling.scale_u(&d.u_tr.samples);
    let y = model.scaling.scale_y(&d.y_tr.samples);
    let n_skip = cfg.n_skip.unwrap_or_else(|| default_n_skip(y.len()));
    let loss = RolloutLoss::new(&lay, &u, &y, n_skip, cfg.rho)?;
    let hm = fd_hessian(&loss, theta, h)?;
    let eigenvalues = sym_eig(&hm)?;
    Ok(HessianReport { eigenvalues, trace: hm.trace() })
}
