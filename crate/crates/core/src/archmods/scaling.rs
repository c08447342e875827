use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fixed per-channel gains applied before signals reach any network:
/// `u ← u · u_scale`, `y ← y · y_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalScaling {
    pub u_scale: f64,
    pub y_scale: f64,
}

impl Default for SignalScaling {
    /// Input divided by the 50 N excitation RMS; output in millimetres.
    fn default() -> Self {
        Self {
            u_scale: 1.0 / 50.0,
            y_scale: 1000.0,
        }
    }
}

impl SignalScaling {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.u_scale) && ok(self.y_scale)) {
            return Err(Error::config("signal scales must be positive and finite"));
        }
        Ok(())
    }

    pub fn scale_u(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|v| v * self.u_scale).collect()
    }

    pub fn scale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.y_scale).collect()
    }

    pub fn unscale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v / self.y_scale).collect()
    }
}
