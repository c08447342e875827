//! Command-line surface. Exit codes: 0 success, 1 usage or validation
//! error, 2 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use manifold_sysid_core::archmods::EncoderLayout;
use manifold_sysid_core::boucwen::make_dataset;
use manifold_sysid_core::rng::{derive_seed, rng_from_seed};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, ModelConfig, RunConfig};
use crate::error::{Result, SysidError};
use crate::io::{
    export_results, export_trace, load_checkpoint, load_dataset, save_checkpoint, save_dataset, write_json, Checkpoint,
    CheckpointKind, Created, Provenance,
};
use crate::pipeline::{self, aggregate, RunStatus};

#[derive(Debug, Parser)]
#[command(name = "manifold-sysid", version, about = "Meta-learned reduced-complexity system identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration overlaid on its preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one Bouc-Wen dataset.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train the full-order model (AdamW, then L-BFGS).
    TrainFull {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit only the linear part of the model.
    TrainLinear {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Learn the parameter manifold and the encoder.
    MetaTrain {
        #[command(flatten)]
        common: Common,
    },
    /// Fit manifold coordinates on a dataset.
    TrainReduced {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifold: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
    },
    /// Monte Carlo study over training lengths.
    McStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifold: Option<PathBuf>,
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
    /// Eigenvalues of the training-loss Hessian.
    Hessian {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Test-portion fit and rmse of a model.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::TrainFull { .. } => "train-full",
            Command::TrainLinear { .. } => "train-linear",
            Command::MetaTrain { .. } => "meta-train",
            Command::TrainReduced { .. } => "train-reduced",
            Command::McStudy { .. } => "mc-study",
            Command::Hessian { .. } => "hessian",
            Command::Eval { .. } => "eval",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Generate { common }
            | Command::TrainFull { common, .. }
            | Command::TrainLinear { common, .. }
            | Command::MetaTrain { common }
            | Command::TrainReduced { common, .. }
            | Command::McStudy { common, .. }
            | Command::Hessian { common, .. }
            | Command::Eval { common, .. } => common,
        }
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("MANIFOLD_SYSID_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| SysidError::config("MANIFOLD_SYSID_THREADS must be a positive integer")),
        Err(_) => Ok(None),
    }
}

fn execute(cmd: &Command) -> Result<i32> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::desk(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    fs::create_dir_all(&common.out).map_err(|e| SysidError::io(&common.out, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| SysidError::config(e.to_string()))?;
    pool.install(|| dispatch(cmd, &cfg, &common.out))
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config_hash: String,
    master_seed: u64,
    preset: &'a str,
    artifacts: Vec<String>,
    result: Value,
}

struct Out<'a> {
    dir: &'a Path,
    cfg: &'a RunConfig,
    prov: Provenance,
    artifacts: Vec<String>,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.into());
        self.dir.join(name)
    }

    fn summary(mut self, command: &str, result: Value) -> Result<()> {
        let path = self.path("summary.json");
        let s = Summary {
            command,
            config_hash: self.prov.config_hash.clone(),
            master_seed: self.prov.master_seed,
            preset: &self.cfg.preset,
            artifacts: self.artifacts.clone(),
            result,
        };
        write_json(&path, &s)
    }
}

fn status_code(s: RunStatus) -> i32 {
    if s.failed() {
        2
    } else {
        0
    }
}

fn model_of(c: &Checkpoint) -> ModelConfig {
    ModelConfig { ssm: c.ssm, scaling: c.scaling }
}

fn dispatch(cmd: &Command, cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let prov = Provenance { config_hash: cfg.hash(), master_seed: cfg.seed };
    let mut out = Out { dir, cfg, prov: prov.clone(), artifacts: Vec::new() };
    let config_path = out.path("config.json");
    write_json(&config_path, cfg)?;
    let name = cmd.name();

    match cmd {
        Command::Generate { .. } => {
            let seed = derive_seed(cfg.seed, "generate", 0);
            let mut d = make_dataset(&cfg.dataset_spec(), &mut rng_from_seed(seed))?;
            d.seed = Some(seed);
            let path = out.path("dataset.json");
            save_dataset(&path, &d, Some(&prov))?;
            out.summary(
                name,
                json!({"n_train": d.u_tr.len(), "n_test": d.u_te.len(), "coefficients": d.coeffs, "seed": seed}),
            )?;
            Ok(0)
        }
        Command::TrainFull { data, .. } | Command::TrainLinear { data, .. } => {
            let d = load_dataset(data)?.dataset;
            let seed = derive_seed(cfg.seed, "init", 0);
            let o = if matches!(cmd, Command::TrainFull { .. }) {
                pipeline::train_full(&d, &cfg.model, &cfg.full, seed)?
            } else {
                pipeline::train_linear_baseline(&d, &cfg.model, &cfg.full, seed)?
            };
            let created = Created {
                seed,
                iteration: o.adam_trace.len() + o.lbfgs_trace.len().saturating_sub(1),
                loss: o.train_loss,
            };
            let ckpt = Checkpoint::theta(cfg.model.ssm, cfg.model.scaling, o.theta.clone(), created, Some(&prov))?;
            let p = out.path("theta.json");
            save_checkpoint(&p, &ckpt)?;
            let p = out.path("trace.csv");
            export_trace(&p, &[("adamw", &o.adam_trace), ("lbfgs", &o.lbfgs_trace)], &prov)?;
            out.summary(
                name,
                json!({"status": o.status, "train_loss": o.train_loss, "metrics": o.result.metrics, "n_theta": o.theta.len()}),
            )?;
            Ok(status_code(o.status))
        }
        Command::MetaTrain { .. } => {
            let o = pipeline::meta_train(&cfg.model, &cfg.meta, &cfg.meta_dataset_spec(), cfg.seed)?;
            let iters = o.trace.len();
            let last = o.trace.last().map(|t| t.loss);
            let created = Created { seed: cfg.seed, iteration: iters, loss: last };
            let m = Checkpoint::manifold(cfg.model.ssm, cfg.model.scaling, &o.manifold, created.clone(), Some(&prov))?;
            let p = out.path("manifold.json");
            save_checkpoint(&p, &m)?;
            let e = Checkpoint::encoder(cfg.model.ssm, cfg.model.scaling, o.encoder.cfg, o.psi.clone(), created, Some(&prov))?;
            let p = out.path("encoder.json");
            save_checkpoint(&p, &e)?;
            let p = out.path("trace.csv");
            export_trace(&p, &[("adam", &o.trace)], &prov)?;
            let w = (iters / 10).clamp(1, 100);
            let mean = |s: &[manifold_sysid_core::optim::TracePoint]| s.iter().map(|t| t.loss).sum::<f64>() / s.len().max(1) as f64;
            out.summary(
                name,
                json!({
                    "iterations": iters,
                    "n_gamma": o.manifold.to_gamma().len(),
                    "n_psi": o.psi.len(),
                    "initial_loss_avg": (iters > 0).then(|| mean(&o.trace[..w])),
                    "final_loss_avg": (iters > 0).then(|| mean(&o.trace[iters - w..])),
                }),
            )?;
            Ok(0)
        }
        Command::TrainReduced { data, manifold, encoder, .. } => {
            let d = load_dataset(data)?.dataset;
            let (mc, ec) = load_pair(manifold, encoder)?;
            let model = model_of(&mc);
            let m = mc.to_manifold()?;
            let enc = EncoderLayout::new(ec.encoder.expect("validated encoder checkpoint"))?;
            let seed = derive_seed(cfg.seed, "init", 0);
            let o = pipeline::train_reduced(&d, &model, &m, &enc, &ec.values, &cfg.reduced, seed)?;
            let created = Created { seed, iteration: o.trace.len(), loss: o.result.train_loss };
            let ckpt = Checkpoint::theta(model.ssm, model.scaling, o.theta.clone(), created, Some(&prov))?;
            let p = out.path("theta.json");
            save_checkpoint(&p, &ckpt)?;
            let p = out.path("trace.csv");
            export_trace(&p, &[("adamw", &o.trace)], &prov)?;
            out.summary(
                name,
                json!({"status": o.result.status, "phi0": o.phi0, "phi": o.phi, "train_loss": o.result.train_loss, "metrics": o.result.metrics}),
            )?;
            Ok(status_code(o.result.status))
        }
        Command::McStudy { manifold, encoder, .. } => {
            let needs = cfg.mc.modes.contains(&Mode::Reduced);
            let loaded = match (manifold, encoder) {
                (Some(m), Some(e)) => Some(load_pair(m, e)?),
                (None, None) if !needs => None,
                _ => return Err(SysidError::config("reduced mode needs both --manifold and --encoder")),
            };
            let parts = match &loaded {
                Some((mc, ec)) => {
                    if mc.ssm != cfg.model.ssm || mc.scaling != cfg.model.scaling {
                        return Err(SysidError::config("manifold checkpoint was trained for a different model"));
                    }
                    Some((mc.to_manifold()?, EncoderLayout::new(ec.encoder.expect("validated encoder checkpoint"))?, ec.values.clone()))
                }
                None => None,
            };
            let results = pipeline::mc_study(cfg, parts.as_ref().map(|(m, e, p)| (m, e, p.as_slice())))?;
            for f in ["results.csv", "aggregate.csv", "timings.csv"] {
                out.path(f);
            }
            export_results(dir, &results)?;
            let agg: Vec<Value> = aggregate(&results)
                .iter()
                .map(|a| {
                    json!({"mode": a.mode, "L": a.l, "n_runs": a.n_runs, "n_failed": a.n_failed,
                           "fit_median": a.fit.median, "rmse_median": a.rmse.median})
                })
                .collect();
            out.summary(name, json!({"runs": results.len(), "aggregate": agg}))?;
            Ok(0)
        }
        Command::Hessian { model, data, .. } => {
            let c = load_checkpoint(model)?.expect_kind(CheckpointKind::Theta)?;
            let d = load_dataset(data)?.dataset;
            let r = pipeline::hessian_spectrum(&c.values, &d, &model_of(&c), &cfg.full, cfg.hessian.h)?;
            let p = out.path("eigenvalues.csv");
            let mut text = format!("# config_hash={} master_seed={}\nindex,eigenvalue\n", prov.config_hash, prov.master_seed);
            for (i, v) in r.eigenvalues.iter().enumerate() {
                text.push_str(&format!("{i},{v}\n"));
            }
            fs::write(&p, text).map_err(|e| SysidError::io(&p, e))?;
            let sum: f64 = r.eigenvalues.iter().sum();
            out.summary(
                name,
                json!({
                    "n": r.eigenvalues.len(),
                    "trace": r.trace,
                    "eigenvalue_sum": sum,
                    "min": r.eigenvalues.first(),
                    "max": r.eigenvalues.last(),
                    "fraction_below_1e-3_max": r.fraction_below(1e-3),
                }),
            )?;
            Ok(0)
        }
        Command::Eval { model, data, .. } => {
            let c = load_checkpoint(model)?.expect_kind(CheckpointKind::Theta)?;
            let d = load_dataset(data)?.dataset;
            let m = pipeline::evaluate(&model_of(&c), &c.values, &d)?;
            println!("fit_percent={} rmse={} n_used={} n_skip={}", m.fit_percent, m.rmse, m.n_used, m.n_skip);
            out.summary(name, json!({"metrics": m}))?;
            Ok(0)
        }
    }
}

fn load_pair(manifold: &Path, encoder: &Path) -> Result<(Checkpoint, Checkpoint)> {
    let mc = load_checkpoint(manifold)?.expect_kind(CheckpointKind::Manifold)?;
    let ec = load_checkpoint(encoder)?.expect_kind(CheckpointKind::Encoder)?;
    if mc.ssm != ec.ssm || mc.n_phi != ec.n_phi {
        return Err(SysidError::config("manifold and encoder checkpoints do not belong together"));
    }
    Ok((mc, ec))
}
