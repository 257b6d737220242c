mod common;

use common::variance;
use pfclt::experiment::{
    compute_oracle, generate_dataset, oracle_on_stream, run_replications, scaling_check,
    ExperimentConfig,
};
use pfclt::rng::SeedRecord;
use pfclt::{Execution, LinearUniformModel, StochVolModel};

fn cfg(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        horizon: 10,
        particles: 500,
        oracle_particles: 50_000,
        reps: 300,
        master_seed: Some(seed),
        ..Default::default()
    }
}

#[test]
fn unscaled_variance_quarters_when_m_quadruples() {
    let model = LinearUniformModel::default();
    let c = cfg(21);
    let data = generate_dataset(&model, &c).unwrap();
    let oracle = compute_oracle(&model, &c, &data.observations).unwrap();
    let rows = scaling_check(&model, &c, &data.observations, &oracle, &[500, 2000]).unwrap();
    for k in 0..3 {
        let ratio = rows[1].unscaled_variance[k] / rows[0].unscaled_variance[k];
        assert!((0.15..0.35).contains(&ratio), "component {k}: {ratio}");
    }
}

#[test]
fn scaled_error_mean_is_near_zero() {
    let model = StochVolModel::default();
    let c = cfg(22);
    let data = generate_dataset(&model, &c).unwrap();
    let oracle = compute_oracle(&model, &c, &data.observations).unwrap();
    let report = run_replications(&model, &c, &data.observations, &oracle).unwrap();
    let r = report.used_rows().len() as f64;
    for k in 0..3 {
        let bound = 3.5 * (report.sigma_hat[k][k] / r).sqrt();
        assert!(report.mean_error[k].abs() < bound, "component {k}");
    }
    assert!(pfclt::stats::min_pivot(&report.sigma_hat) > 0.0);
    assert!(pfclt::stats::asymmetry(&report.sigma_hat) < 1e-12);
}

#[test]
fn reference_means_at_larger_m_agree_more_closely() {
    // pairs of independent reference runs at m and 100 m: the spread of
    // their differences should shrink by about sqrt(100) = 10
    let model = LinearUniformModel::default();
    let c = cfg(23);
    let z = generate_dataset(&model, &c).unwrap().observations;
    let spread = |m: usize| {
        let diffs = Execution::Parallel.map(60, |r| {
            let a = oracle_on_stream(&model, &z, m, SeedRecord::new(23, 2 * r as u64 + 1)).unwrap();
            let b = oracle_on_stream(&model, &z, m, SeedRecord::new(23, 2 * r as u64 + 2)).unwrap();
            a[0] - b[0]
        });
        variance(&diffs).sqrt()
    };
    let shrink = spread(500) / spread(50_000);
    assert!((5.0..20.0).contains(&shrink), "{shrink}");
}
