use meanfield::boltzmann::{exact_simulate, maxwell_isotropic, wealth_model, RunOptions};
use meanfield::experiment::{parse_config, run};
use meanfield::metrics::excess_kurtosis;
use meanfield::{make_rng, Ensemble};

#[test]
fn maxwell_marginal_relaxes_to_gaussian_kurtosis() {
    let m = maxwell_isotropic(3, 1.0).unwrap();
    let mut rng = make_rng(41, 0);
    let half = 3f64.sqrt();
    let e0 = Ensemble::from_fn(5000, 3, |_, z| {
        z.iter_mut().for_each(|v| *v = rng.uniform_range(-half, half))
    })
    .unwrap();
    assert!(excess_kurtosis(&e0.coordinate(0)) < -1.0);
    let run = exact_simulate(&m, &e0, 10.0, &mut rng, &RunOptions::counters_only()).unwrap();
    let k = excess_kurtosis(&run.ensemble.coordinate(0));
    assert!(k.abs() <= 0.15, "excess kurtosis {k}");
}

#[test]
fn wealth_is_conserved_in_mean() {
    let model = wealth_model(|r| [r.uniform(), r.uniform(), r.uniform(), r.uniform()]);
    let root = make_rng(43, 0);
    let drifts: Vec<f64> = (0..100)
        .map(|rep| {
            let mut rng = root.substream(rep);
            let e0 = Ensemble::from_fn(200, 1, |_, z| z[0] = 1.0).unwrap();
            let run = exact_simulate(&model, &e0, 5.0, &mut rng, &RunOptions::counters_only()).unwrap();
            run.ensemble.states().iter().sum::<f64>() / 200.0 - 1.0
        })
        .collect();
    let mean = drifts.iter().sum::<f64>() / 100.0;
    let var = drifts.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 99.0;
    let se = (var / 100.0).sqrt();
    assert!(se > 0.0);
    assert!(mean.abs() <= 4.0 * se, "mean drift {mean}, standard error {se}");
}

#[test]
fn kac_covariance_decays_like_one_over_n() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/kac_chaos.json")).unwrap();
    let mut cfg = parse_config(&text).unwrap();
    cfg.thresholds = serde_json::json!({"slope_min": -1.3, "slope_max": -0.7});
    let dir = tempfile::tempdir().unwrap();
    let s = run(&cfg, dir.path()).unwrap();
    assert!(s.passed, "{:?}", s.checks);
}
