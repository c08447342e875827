use manifold_sysid::config::Mode;
use manifold_sysid::io::{
    export_results, load_checkpoint, load_dataset, save_checkpoint, save_dataset, Checkpoint, CheckpointKind, Created,
    Provenance,
};
use manifold_sysid::pipeline::{quartiles, FitResult, RunStatus};
use manifold_sysid::SysidError;
use manifold_sysid_core::archmods::{init_encoder, init_manifold, init_ssm, EncoderConfig, EncoderLayout, SignalScaling, SsmConfig, ThetaLayout};
use manifold_sysid_core::boucwen::{make_dataset_with, BoucWenCoeffs};
use manifold_sysid_core::metrics::MetricsReport;
use manifold_sysid_core::rng::rng_from_seed;
use manifold_sysid_core::signals::{multisine, MultisineSpec, Signal};

fn prov() -> Provenance {
    Provenance { config_hash: "0123456789abcdef".into(), master_seed: 42 }
}

fn created() -> Created {
    Created { seed: 9, iteration: 17, loss: Some(0.125) }
}

#[test]
fn dataset_save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng_from_seed(1);
    let u1 = multisine(&MultisineSpec::benchmark(200), &mut rng).unwrap();
    let u2 = multisine(&MultisineSpec::benchmark(150), &mut rng).unwrap();
    let d = make_dataset_with(BoucWenCoeffs::NOMINAL, u1, u2, 8e-6, 20, &mut rng).unwrap();

    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_dataset(&a, &d, Some(&prov())).unwrap();
    let loaded = load_dataset(&a).unwrap();
    assert_eq!(loaded.dataset.u_tr.samples, d.u_tr.samples);
    assert_eq!(loaded.dataset.y_te.samples, d.y_te.samples);
    assert_eq!(loaded.dataset.coeffs, Some(BoucWenCoeffs::NOMINAL));
    assert_eq!(loaded.provenance, Some(prov()));
    save_dataset(&b, &loaded.dataset, loaded.provenance.as_ref()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn dataset_with_mismatched_lengths_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = |n| Signal::new(vec![0.5; n], 750.0).unwrap();
    let mut d = make_dataset_with(BoucWenCoeffs::NOMINAL, s(20), s(20), 0.0, 20, &mut rng_from_seed(0)).unwrap();
    let path = dir.path().join("d.json");
    save_dataset(&path, &d, None).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["y_tr"].as_array_mut().unwrap().pop();
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    assert!(load_dataset(&path).is_err());

    d.y_tr = s(19);
    assert!(save_dataset(&path, &d, None).is_err());
}

#[test]
fn theta_checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ssm = SsmConfig { hidden_f: 8, hidden_g: 8, ..SsmConfig::default() };
    let lay = ThetaLayout::new(ssm).unwrap();
    let mut theta = init_ssm(&lay, &mut rng_from_seed(4));
    theta[0] = 0.1 + 0.2;
    theta[1] = f64::MIN_POSITIVE;
    theta[2] = -1e300;
    let c = Checkpoint::theta(ssm, SignalScaling::default(), theta.clone(), created(), Some(&prov())).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_checkpoint(&a, &c).unwrap();
    let back = load_checkpoint(&a).unwrap();
    assert!(back.values.iter().zip(&theta).all(|(x, y)| x.to_bits() == y.to_bits()));
    save_checkpoint(&b, &back).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn manifold_checkpoint_stores_n_phi_plus_one_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let ssm = SsmConfig::default();
    let lay = ThetaLayout::new(ssm).unwrap();
    let m = init_manifold(&lay, 20, &mut rng_from_seed(2)).unwrap();
    let c = Checkpoint::manifold(ssm, SignalScaling::default(), &m, created(), None).unwrap();
    let path = dir.path().join("m.json");
    save_checkpoint(&path, &c).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.values.len(), 21 * lay.total());
    assert_eq!(back.to_manifold().unwrap(), m);
}

#[test]
fn wrong_checkpoint_kind_is_reported() {
    let ssm = SsmConfig { hidden_f: 4, hidden_g: 4, ..SsmConfig::default() };
    let cfg = EncoderConfig { n_in: 2, n_h: 3, head_hidden: 3, n_phi: 2 };
    let psi = init_encoder(&EncoderLayout::new(cfg).unwrap(), &mut rng_from_seed(0));
    let c = Checkpoint::encoder(ssm, SignalScaling::default(), cfg, psi, created(), None).unwrap();
    let err = c.expect_kind(CheckpointKind::Manifold).unwrap_err();
    assert!(matches!(err, SysidError::KindMismatch { expected: CheckpointKind::Manifold, found: CheckpointKind::Encoder }));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn corrupted_value_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ssm = SsmConfig { hidden_f: 4, hidden_g: 4, ..SsmConfig::default() };
    let lay = ThetaLayout::new(ssm).unwrap();
    let c = Checkpoint::theta(ssm, SignalScaling::default(), vec![0.0; lay.total()], created(), None).unwrap();
    let path = dir.path().join("t.json");
    save_checkpoint(&path, &c).unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    v["values"].as_array_mut().unwrap().push(1.0.into());
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

fn result(mode: Mode, l: usize, run: usize, fit: f64) -> FitResult {
    FitResult {
        mode,
        l,
        run,
        metrics: Some(MetricsReport { fit_percent: fit, rmse: 1.0 / (fit + 1.0), mse: 0.0, n_used: 90, n_skip: 10 }),
        train_loss: Some(0.5),
        wall_time_s: 0.25,
        status: RunStatus::Completed,
        seed: (l * 100 + run) as u64,
        master_seed: 42,
        config_hash: "0123456789abcdef".into(),
    }
}

fn read_rows(path: &std::path::Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn empty_results_give_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    export_results(dir.path(), &[]).unwrap();
    for f in ["results.csv", "aggregate.csv", "timings.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
    }
}

#[test]
fn results_and_aggregates_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut rs = Vec::new();
    for mode in [Mode::Full, Mode::Reduced] {
        for l in [100, 250, 2500] {
            for run in 0..5 {
                rs.push(result(mode, l, run, (run * 7 % 5) as f64 * 10.0 + l as f64 / 100.0));
            }
        }
    }
    export_results(dir.path(), &rs).unwrap();
    let rows = read_rows(&dir.path().join("results.csv"));
    let agg = read_rows(&dir.path().join("aggregate.csv"));
    assert_eq!(rows.len(), 30);
    assert_eq!(agg.len(), 6);
    assert_eq!(read_rows(&dir.path().join("timings.csv")).len(), 30);

    for a in &agg {
        let fits: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == a[0] && r[1] == a[1])
            .map(|r| r[3].parse().unwrap())
            .collect();
        assert_eq!(fits.len(), 5);
        let q = quartiles(&fits);
        assert_eq!(a[4].parse::<f64>().unwrap(), q.median);
        assert_eq!(a[5].parse::<f64>().unwrap(), q.q1);
        assert_eq!(a[6].parse::<f64>().unwrap(), q.q3);
    }
    let header = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(!header.contains("wall_time"));
}
