use manifold_sysid_core::archmods::{init_encoder, init_manifold, EncoderLayout, Manifold, ThetaLayout};
use manifold_sysid_core::boucwen::{make_dataset_indexed, DatasetSpec};
use manifold_sysid_core::losses::{meta_task_loss, MetaShapes, MetaTask};
use manifold_sysid_core::metrics::default_n_skip;
use manifold_sysid_core::optim::{adamw_run_with, TracePoint};
use manifold_sysid_core::rng::{derive_seed, rng_from_seed};
use rayon::prelude::*;

use crate::config::{MetaConfig, ModelConfig};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct MetaOutcome {
    pub manifold: Manifold,
    pub encoder: EncoderLayout,
    pub psi: Vec<f64>,
    /// Batch loss at each iteration, before the update.
    pub trace: Vec<TracePoint>,
}

fn task(spec: &DatasetSpec, model: &ModelConfig, batch_seed: u64, i: usize) -> manifold_sysid_core::Result<MetaTask> {
    let d = make_dataset_indexed(spec, batch_seed, i)?;
    Ok(MetaTask::from_dataset(&d, &model.scaling))
}

/// Joint Adam on `[γ; ψ]` against the batch-mean test loss of
/// encoder → lift → rollout. Records are simulated and differentiated in
/// parallel; gradients are summed in index order so the result does not
/// depend on the number of threads.
pub fn meta_train(model: &ModelConfig, meta: &MetaConfig, spec: &DatasetSpec, master_seed: u64) -> Result<MetaOutcome> {
    let lay = ThetaLayout::new(model.ssm)?;
    let enc = EncoderLayout::new(meta.encoder_config())?;
    let n_skip = meta.n_skip.unwrap_or_else(|| default_n_skip(spec.test.n_samples));
    let shapes = MetaShapes::new(lay.clone(), enc.clone(), n_skip)?;
    spec.validate()?;

    let mut rng = rng_from_seed(derive_seed(master_seed, "meta-init", 0));
    let m0 = init_manifold(&lay, meta.n_phi, &mut rng)?;
    let mut x0 = m0.to_gamma();
    x0.extend(init_encoder(&enc, &mut rng));

    let b = meta.batch_size;
    let pool: Option<Vec<MetaTask>> = match meta.pool {
        Some(p) => {
            let seed = derive_seed(master_seed, "meta-pool", 0);
            Some((0..p).into_par_iter().map(|i| task(spec, model, seed, i)).collect::<manifold_sysid_core::Result<_>>()?)
        }
        None => None,
    };

    let out = adamw_run_with(&x0, &meta.adam, |it, x, grad| {
        let (gamma, psi) = shapes.split(x);
        let m = shapes.manifold(gamma)?;
        let batch_seed = derive_seed(master_seed, "meta-batch", it as u64);
        let parts: Vec<(f64, Vec<f64>)> = (0..b)
            .into_par_iter()
            .map(|i| {
                let fresh;
                let t = match &pool {
                    Some(p) => &p[(it * b + i) % p.len()],
                    None => {
                        fresh = task(spec, model, batch_seed, i)?;
                        &fresh
                    }
                };
                let mut g = vec![0.0; x.len()];
                let l = meta_task_loss(&shapes, &m, psi, t, Some(&mut g))?;
                Ok((l, g))
            })
            .collect::<manifold_sysid_core::Result<_>>()?;
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            for (a, d) in grad.iter_mut().zip(g) {
                *a += d;
            }
        }
        let scale = 1.0 / b as f64;
        grad.iter_mut().for_each(|v| *v *= scale);
        Ok(loss * scale)
    })?;

    let (gamma, psi) = shapes.split(&out.x);
    Ok(MetaOutcome { manifold: shapes.manifold(gamma)?, encoder: enc, psi: psi.to_vec(), trace: out.trace })
}
