//! Declarative run configuration: presets, JSON overlay and config hash.

use std::path::Path;

use manifold_sysid_core::archmods::{EncoderConfig, SignalScaling, SsmConfig};
use manifold_sysid_core::boucwen::{BoucWenCoeffs, CoeffRanges, DatasetSpec, DEFAULT_SUBSTEPS};
use manifold_sysid_core::optim::{AdamConfig, LbfgsConfig, Schedule};
use manifold_sysid_core::signals::MultisineSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, SysidError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Excitation {
    pub fs: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub rms: f64,
}

impl Excitation {
    pub fn spec(&self, n_samples: usize) -> MultisineSpec {
        MultisineSpec { n_samples, fs: self.fs, f_lo: self.f_lo, f_hi: self.f_hi, target_rms: self.rms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub ssm: SsmConfig,
    pub scaling: SignalScaling,
}

/// Single-dataset generation (`generate`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub ranges: CoeffRanges,
    pub noise_std: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullConfig {
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
    /// Weight of `‖θ‖²`.
    pub rho: f64,
    /// Transient samples excluded from losses; `null` picks the default rule.
    pub n_skip: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedConfig {
    pub adam: AdamConfig,
    pub n_skip: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderDims {
    pub n_h: usize,
    pub head_hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    pub n_phi: usize,
    pub batch_size: usize,
    /// Length of both the training and the test portion of each record.
    pub seq_len: usize,
    pub encoder: EncoderDims,
    /// `adam.total_iters` is the number of meta iterations.
    pub adam: AdamConfig,
    pub ranges: CoeffRanges,
    pub noise_std: f64,
    pub substeps: usize,
    /// Reuse a fixed pool of this many records instead of resampling.
    pub pool: Option<usize>,
    pub n_skip: Option<usize>,
}

impl MetaConfig {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig { n_in: 2, n_h: self.encoder.n_h, head_hidden: self.encoder.head_hidden, n_phi: self.n_phi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Reduced,
    Linear,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Reduced => "reduced",
            Mode::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub lengths: Vec<usize>,
    pub runs: usize,
    pub modes: Vec<Mode>,
    /// Length of the long nominal record windows are cut from.
    pub long_len: usize,
    pub test_len: usize,
    pub noise_std: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianConfig {
    /// Central-difference step on θ (signals are already scaled).
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub excitation: Excitation,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub full: FullConfig,
    pub reduced: ReducedConfig,
    pub meta: MetaConfig,
    pub mc: McConfig,
    pub hessian: HessianConfig,
}

pub const FULL_SCALE_LENGTHS: [usize; 11] = [100, 200, 400, 500, 600, 800, 1000, 2000, 3000, 4000, 5000];

fn cosine(lr_init: f64, lr_final: f64, iters: usize, wd: f64) -> AdamConfig {
    AdamConfig {
        lr_init,
        lr_final,
        weight_decay: wd,
        total_iters: iters,
        schedule: Schedule::Cosine,
        ..AdamConfig::default()
    }
}

impl RunConfig {
    /// CPU-tractable scale that still exercises every code path.
    pub fn desk() -> Self {
        let excitation = Excitation { fs: 750.0, f_lo: 5.0, f_hi: 150.0, rms: 50.0 };
        Self {
            preset: "desk".into(),
            seed: 0,
            excitation,
            model: ModelConfig {
                ssm: SsmConfig { n_x: 3, n_u: 1, n_y: 1, hidden_f: 8, hidden_g: 8 },
                scaling: SignalScaling::default(),
            },
            data: DataConfig {
                n_train: 8192,
                n_test: 8192,
                ranges: CoeffRanges::fixed(BoucWenCoeffs::NOMINAL),
                noise_std: 8e-6,
                substeps: DEFAULT_SUBSTEPS,
            },
            full: FullConfig {
                adam: cosine(1e-2, 1e-3, 4000, 1e-4),
                lbfgs: LbfgsConfig { max_iters: 1000, ..LbfgsConfig::default() },
                rho: 0.0,
                n_skip: None,
            },
            reduced: ReducedConfig { adam: cosine(1e-2, 1e-3, 2000, 0.0), n_skip: None },
            meta: MetaConfig {
                n_phi: 4,
                batch_size: 16,
                seq_len: 256,
                encoder: EncoderDims { n_h: 32, head_hidden: 32 },
                adam: cosine(2e-3, 2e-4, 3000, 0.0),
                ranges: CoeffRanges::around(BoucWenCoeffs::NOMINAL, 0.2),
                noise_std: 8e-6,
                substeps: DEFAULT_SUBSTEPS,
                pool: None,
                n_skip: None,
            },
            mc: McConfig {
                lengths: vec![100, 250, 2500],
                runs: 10,
                modes: vec![Mode::Full, Mode::Reduced],
                long_len: 40960,
                test_len: 8192,
                noise_std: 8e-6,
                substeps: DEFAULT_SUBSTEPS,
            },
            hessian: HessianConfig { h: 1e-4 },
        }
    }

    /// Full-size architecture and budgets (far beyond a desktop CPU).
    pub fn full_scale() -> Self {
        let mut c = Self::desk();
        c.preset = "full-scale".into();
        c.model.ssm = SsmConfig::default();
        c.full.adam = cosine(1e-3, 1e-3, 40_000, 1e-4);
        c.full.lbfgs.max_iters = 10_000;
        c.reduced.adam = cosine(1e-3, 1e-3, 10_000, 0.0);
        c.meta = MetaConfig {
            n_phi: 20,
            batch_size: 128,
            seq_len: 2000,
            encoder: EncoderDims { n_h: 128, head_hidden: 128 },
            adam: cosine(2e-4, 2e-5, 200_000, 0.0),
            ranges: CoeffRanges::wide(),
            ..c.meta
        };
        c.mc.lengths = FULL_SCALE_LENGTHS.to_vec();
        c.mc.runs = 100;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full-scale" => Ok(Self::full_scale()),
            other => Err(SysidError::config(format!("unknown preset `{other}`"))),
        }
    }

    /// Overlays a user document on its preset (default `desk`); unknown keys
    /// are rejected.
    pub fn from_json(user: &Value) -> Result<Self> {
        let Value::Object(map) = user else {
            return Err(SysidError::config("configuration must be a JSON object"));
        };
        let preset = match map.get("preset") {
            None => "desk",
            Some(Value::String(s)) => s.as_str(),
            Some(_) => return Err(SysidError::config("`preset` must be a string")),
        };
        let mut base = serde_json::to_value(Self::preset(preset)?).expect("config serializes");
        merge(&mut base, user);
        let cfg: Self = serde_json::from_value(base).map_err(|e| SysidError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SysidError::io(path, e))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| SysidError::Malformed { path: path.into(), source: e })?;
        Self::from_json(&v)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.ssm.validate()?;
        self.model.scaling.validate()?;
        self.excitation.spec(self.data.n_train).validate()?;
        self.excitation.spec(self.data.n_test).validate()?;
        self.data.ranges.validate()?;
        self.full.adam.validate()?;
        self.full.lbfgs.validate()?;
        self.reduced.adam.validate()?;
        self.meta.adam.validate()?;
        self.meta.ranges.validate()?;
        self.meta.encoder_config().validate()?;
        let n_theta = manifold_sysid_core::archmods::theta_count(&self.model.ssm);
        if self.meta.n_phi == 0 || self.meta.n_phi >= n_theta {
            return Err(SysidError::config("meta.n_phi must satisfy 0 < n_phi < n_theta"));
        }
        if self.meta.batch_size == 0 || self.meta.pool == Some(0) {
            return Err(SysidError::config("meta.batch_size and meta.pool must be >= 1"));
        }
        if self.meta.seq_len < 2 {
            return Err(SysidError::config("meta.seq_len must be >= 2"));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(nonneg(self.data.noise_std) && nonneg(self.meta.noise_std) && nonneg(self.mc.noise_std) && nonneg(self.full.rho)) {
            return Err(SysidError::config("noise levels and rho must be finite and >= 0"));
        }
        if self.data.substeps == 0 || self.meta.substeps == 0 || self.mc.substeps == 0 {
            return Err(SysidError::config("substeps must be >= 1"));
        }
        if self.mc.runs == 0 || self.mc.modes.is_empty() || self.mc.lengths.is_empty() {
            return Err(SysidError::config("mc.runs, mc.modes and mc.lengths must be non-empty"));
        }
        for &l in &self.mc.lengths {
            if l < 2 * self.full.n_skip.unwrap_or(manifold_sysid_core::metrics::default_n_skip(l)).max(1) || l > self.mc.long_len {
                return Err(SysidError::config(format!("mc length {l} must lie in [2·n_skip, long_len]")));
            }
        }
        self.excitation.spec(self.mc.long_len).validate()?;
        self.excitation.spec(self.mc.test_len).validate()?;
        if !(self.hessian.h > 0.0 && self.hessian.h.is_finite()) {
            return Err(SysidError::config("hessian.h must be positive"));
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            ranges: self.data.ranges,
            train: self.excitation.spec(self.data.n_train),
            test: self.excitation.spec(self.data.n_test),
            noise_std: self.data.noise_std,
            substeps: self.data.substeps,
        }
    }

    pub fn meta_dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            ranges: self.meta.ranges,
            train: self.excitation.spec(self.meta.seq_len),
            test: self.excitation.spec(self.meta.seq_len),
            noise_std: self.meta.noise_std,
            substeps: self.meta.substeps,
        }
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canon.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Recursive object merge; non-object values in `over` replace `base`.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}
