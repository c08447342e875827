use manifold_sysid_core::archmods::{EncoderLayout, Manifold};
use manifold_sysid_core::boucwen::{make_dataset_with, BoucWenCoeffs, Dataset};
use manifold_sysid_core::rng::{derive_seed, rng_from_seed};
use manifold_sysid_core::signals::multisine;
use rand::Rng;
use rayon::prelude::*;

use super::train::{train_full, train_linear_baseline, train_reduced};
use super::FitResult;
use crate::config::{Mode, RunConfig};
use crate::error::{Result, SysidError};

/// Long noisy training record and clean test record of the nominal system.
pub fn nominal_record(cfg: &RunConfig, master_seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(derive_seed(master_seed, "mc-data", 0));
    let u_tr = multisine(&cfg.excitation.spec(cfg.mc.long_len), &mut rng)?;
    let u_te = multisine(&cfg.excitation.spec(cfg.mc.test_len), &mut rng)?;
    Ok(make_dataset_with(BoucWenCoeffs::NOMINAL, u_tr, u_te, cfg.mc.noise_std, cfg.mc.substeps, &mut rng)?)
}

/// Training window `[start, start + len)` with the full test portion.
pub fn window(d: &Dataset, start: usize, len: usize) -> Result<Dataset> {
    Ok(Dataset { u_tr: d.u_tr.window(start, len)?, y_tr: d.y_tr.window(start, len)?, ..d.clone() })
}

struct Job {
    l: usize,
    run: usize,
    mode: Mode,
    start: usize,
    seed: u64,
}

/// Monte Carlo study over random training windows of a long nominal record.
/// Every (L, run) pair shares one window and one init seed across modes;
/// runs execute in parallel and come back in (L, run, mode) order.
pub fn mc_study(cfg: &RunConfig, reduced: Option<(&Manifold, &EncoderLayout, &[f64])>) -> Result<Vec<FitResult>> {
    let mc = &cfg.mc;
    if mc.modes.contains(&Mode::Reduced) && reduced.is_none() {
        return Err(SysidError::config("reduced mode needs a manifold and an encoder"));
    }
    let data = nominal_record(cfg, cfg.seed)?;
    let hash = cfg.hash();
    let mut jobs = Vec::new();
    for (li, &l) in mc.lengths.iter().enumerate() {
        for run in 0..mc.runs {
            let index = (li * mc.runs + run) as u64;
            let start = rng_from_seed(derive_seed(cfg.seed, "mc-window", index)).random_range(0..=mc.long_len - l);
            let seed = derive_seed(cfg.seed, "mc-init", index);
            for &mode in &mc.modes {
                jobs.push(Job { l, run, mode, start, seed });
            }
        }
    }
    jobs.par_iter()
        .map(|j| {
            let d = window(&data, j.start, j.l)?;
            let mut r = match j.mode {
                Mode::Full => train_full(&d, &cfg.model, &cfg.full, j.seed)?.result,
                Mode::Linear => train_linear_baseline(&d, &cfg.model, &cfg.full, j.seed)?.result,
                Mode::Reduced => {
                    let (m, enc, psi) = reduced.expect("checked above");
                    train_reduced(&d, &cfg.model, m, enc, psi, &cfg.reduced, j.seed)?.result
                }
            };
            r.run = j.run;
            r.master_seed = cfg.seed;
            r.config_hash = hash.clone();
            Ok(r)
        })
        .collect()
}
