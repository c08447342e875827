//! File formats: JSON datasets and checkpoints with 17-significant-digit
//! reals, CSV result tables, and the per-command summary.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use manifold_sysid_core::archmods::{EncoderConfig, EncoderLayout, Layout, Manifold, SignalScaling, SsmConfig, ThetaLayout};
use manifold_sysid_core::boucwen::{BoucWenCoeffs, Dataset};
use manifold_sysid_core::optim::TracePoint;
use manifold_sysid_core::signals::Signal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Result, SysidError};
use crate::pipeline::{aggregate, FitResult};

/// Config hash and master seed stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
}

/// Pretty JSON with every f64 printed as `{:.16e}` (lossless round-trip).
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| SysidError::NonFinite(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = to_json_bytes(value)?;
    fs::write(path, bytes).map_err(|e| SysidError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| SysidError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SysidError::Malformed { path: path.into(), source: e })
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SysidError::NonFinite(what.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub fs: f64,
    pub noise_std: f64,
    pub coefficients: Option<BoucWenCoeffs>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDoc {
    format: String,
    provenance: Option<Provenance>,
    metadata: DatasetMeta,
    u_tr: Vec<f64>,
    y_tr: Vec<f64>,
    u_te: Vec<f64>,
    y_te: Vec<f64>,
}

const DATASET_FORMAT: &str = "manifold-sysid/dataset/1";
const CHECKPOINT_FORMAT: &str = "manifold-sysid/checkpoint/1";

/// A dataset plus the provenance stamp it was saved with.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: Dataset,
    pub provenance: Option<Provenance>,
}

pub fn save_dataset(path: &Path, d: &Dataset, provenance: Option<&Provenance>) -> Result<()> {
    d.validate()?;
    let doc = DatasetDoc {
        format: DATASET_FORMAT.into(),
        provenance: provenance.cloned(),
        metadata: DatasetMeta { fs: d.fs, noise_std: d.noise_std, coefficients: d.coeffs, seed: d.seed },
        u_tr: d.u_tr.samples.clone(),
        y_tr: d.y_tr.samples.clone(),
        u_te: d.u_te.samples.clone(),
        y_te: d.y_te.samples.clone(),
    };
    write_json(path, &doc)
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let doc: DatasetDoc = read_json(path)?;
    if doc.format != DATASET_FORMAT {
        return Err(SysidError::config(format!("{}: not a dataset document", path.display())));
    }
    for (name, v) in [("u_tr", &doc.u_tr), ("y_tr", &doc.y_tr), ("u_te", &doc.u_te), ("y_te", &doc.y_te)] {
        check_finite(name, v)?;
    }
    let fs = doc.metadata.fs;
    let sig = |v: Vec<f64>| Signal::new(v, fs);
    let dataset = Dataset {
        u_tr: sig(doc.u_tr)?,
        y_tr: sig(doc.y_tr)?,
        u_te: sig(doc.u_te)?,
        y_te: sig(doc.y_te)?,
        fs,
        coeffs: doc.metadata.coefficients,
        noise_std: doc.metadata.noise_std,
        seed: doc.metadata.seed,
    };
    dataset.validate()?;
    Ok(DatasetFile { dataset, provenance: doc.provenance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    Theta,
    Manifold,
    Encoder,
}

impl fmt::Display for CheckpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckpointKind::Theta => "theta",
            CheckpointKind::Manifold => "manifold",
            CheckpointKind::Encoder => "encoder",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Created {
    pub seed: u64,
    pub iteration: usize,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub kind: CheckpointKind,
    pub ssm: SsmConfig,
    pub n_phi: Option<usize>,
    pub encoder: Option<EncoderConfig>,
    pub scaling: SignalScaling,
    pub layout: Layout,
    pub created: Created,
    pub provenance: Option<Provenance>,
    pub values: Vec<f64>,
}

impl Checkpoint {
    fn build(
        kind: CheckpointKind,
        ssm: SsmConfig,
        n_phi: Option<usize>,
        encoder: Option<EncoderConfig>,
        scaling: SignalScaling,
        values: Vec<f64>,
        created: Created,
        provenance: Option<&Provenance>,
    ) -> Result<Self> {
        let mut c = Self {
            format: CHECKPOINT_FORMAT.into(),
            kind,
            ssm,
            n_phi,
            encoder,
            scaling,
            layout: Layout::from_segments(Vec::new())?,
            created,
            provenance: provenance.cloned(),
            values,
        };
        c.layout = c.expected_layout()?;
        c.validate()?;
        Ok(c)
    }

    pub fn theta(ssm: SsmConfig, scaling: SignalScaling, theta: Vec<f64>, created: Created, p: Option<&Provenance>) -> Result<Self> {
        Self::build(CheckpointKind::Theta, ssm, None, None, scaling, theta, created, p)
    }

    pub fn manifold(ssm: SsmConfig, scaling: SignalScaling, m: &Manifold, created: Created, p: Option<&Provenance>) -> Result<Self> {
        Self::build(CheckpointKind::Manifold, ssm, Some(m.n_phi), None, scaling, m.to_gamma(), created, p)
    }

    pub fn encoder(ssm: SsmConfig, scaling: SignalScaling, cfg: EncoderConfig, psi: Vec<f64>, created: Created, p: Option<&Provenance>) -> Result<Self> {
        Self::build(CheckpointKind::Encoder, ssm, Some(cfg.n_phi), Some(cfg), scaling, psi, created, p)
    }

    fn expected_layout(&self) -> Result<Layout> {
        let theta = ThetaLayout::new(self.ssm)?;
        Ok(match self.kind {
            CheckpointKind::Theta => theta.layout().clone(),
            CheckpointKind::Manifold => {
                let n_phi = self.n_phi.ok_or_else(|| SysidError::config("manifold checkpoint lacks n_phi"))?;
                Manifold::gamma_layout(theta.total(), n_phi)
            }
            CheckpointKind::Encoder => {
                let cfg = self.encoder.ok_or_else(|| SysidError::config("encoder checkpoint lacks its config"))?;
                EncoderLayout::new(cfg)?.layout().clone()
            }
        })
    }

    fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(SysidError::config("not a checkpoint document"));
        }
        self.scaling.validate()?;
        if self.layout != self.expected_layout()? {
            return Err(SysidError::config("checkpoint layout does not match its configuration"));
        }
        if self.values.len() != self.layout.total() {
            return Err(manifold_sysid_core::Error::DimensionMismatch {
                what: "checkpoint values",
                expected: self.layout.total(),
                found: self.values.len(),
            }
            .into());
        }
        check_finite("checkpoint values", &self.values)
    }

    pub fn expect_kind(self, kind: CheckpointKind) -> Result<Self> {
        if self.kind != kind {
            return Err(SysidError::KindMismatch { expected: kind, found: self.kind });
        }
        Ok(self)
    }

    pub fn to_manifold(&self) -> Result<Manifold> {
        let n_theta = ThetaLayout::new(self.ssm)?.total();
        Ok(Manifold::from_gamma(n_theta, self.n_phi.unwrap_or(0), &self.values)?)
    }
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    c.validate()?;
    write_json(path, c)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let c: Checkpoint = read_json(path)?;
    c.validate()?;
    Ok(c)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn prov_line(p: &Provenance) -> String {
    format!("# config_hash={} master_seed={}\n", p.config_hash, p.master_seed)
}

/// `iteration,stage,lr,loss` rows behind a provenance comment line.
pub fn export_trace(path: &Path, stages: &[(&str, &[TracePoint])], p: &Provenance) -> Result<()> {
    let mut out = prov_line(p).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["iteration", "stage", "lr", "loss"])?;
        for (stage, points) in stages {
            for t in *points {
                w.write_record([t.iter.to_string(), stage.to_string(), fmt_f64(t.lr), fmt_f64(t.loss)])?;
            }
        }
        w.flush().map_err(|e| SysidError::io(path, e))?;
    }
    fs::write(path, out).map_err(|e| SysidError::io(path, e))
}

/// Writes `results.csv` (one row per run), the per-(mode, L) aggregate
/// next to it, and wall-clock times to a separate `timings.csv`.
pub fn export_results(dir: &Path, results: &[FitResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    w.write_record(["mode", "L", "run", "fit_percent", "rmse", "status", "seed", "master_seed", "config_hash"])?;
    for r in results {
        w.write_record([
            r.mode.as_str().to_string(),
            r.l.to_string(),
            r.run.to_string(),
            fmt_f64(r.fit_percent()),
            fmt_f64(r.rmse()),
            r.status.as_str().to_string(),
            r.seed.to_string(),
            r.master_seed.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    w.flush().map_err(|e| SysidError::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("aggregate.csv"))?;
    w.write_record([
        "mode", "L", "n_runs", "n_failed", "fit_median", "fit_q1", "fit_q3", "rmse_median", "rmse_q1", "rmse_q3", "master_seed",
        "config_hash",
    ])?;
    let (seed, hash) = results.first().map(|r| (r.master_seed.to_string(), r.config_hash.clone())).unwrap_or_default();
    for a in aggregate(results) {
        w.write_record([
            a.mode.as_str().to_string(),
            a.l.to_string(),
            a.n_runs.to_string(),
            a.n_failed.to_string(),
            fmt_f64(a.fit.median),
            fmt_f64(a.fit.q1),
            fmt_f64(a.fit.q3),
            fmt_f64(a.rmse.median),
            fmt_f64(a.rmse.q1),
            fmt_f64(a.rmse.q3),
            seed.clone(),
            hash.clone(),
        ])?;
    }
    w.flush().map_err(|e| SysidError::io(dir, e))?;

    let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
    w.write_record(["mode", "L", "run", "wall_time_s"])?;
    for r in results {
        w.write_record([r.mode.as_str().to_string(), r.l.to_string(), r.run.to_string(), fmt_f64(r.wall_time_s)])?;
    }
    w.flush().map_err(|e| SysidError::io(dir, e))?;
    Ok(())
}
