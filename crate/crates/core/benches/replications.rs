//! Sequential vs rayon-parallel execution of the replication harness and
//! the exact covariance enumeration.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pfclt::exact::{ExactDiagnostics, SigmaTarget};
use pfclt::experiment::{compute_oracle, generate_dataset, run_replications, ExperimentConfig};
use pfclt::{DiscreteHmmModel, Execution, LinearUniformModel, StochVolModel};
use std::hint::black_box;

fn cfg(execution: Execution) -> ExperimentConfig {
    ExperimentConfig {
        horizon: 25,
        particles: 500,
        oracle_particles: 20_000,
        reps: 64,
        master_seed: Some(2024),
        execution,
        ..Default::default()
    }
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("replications");
    group.sample_size(10);

    let linear = LinearUniformModel::default();
    let base = cfg(Execution::Sequential);
    let data = generate_dataset(&linear, &base).unwrap();
    let oracle = compute_oracle(&linear, &base, &data.observations).unwrap();
    for (name, exec) in MODES {
        let cfg = cfg(exec);
        group.bench_with_input(BenchmarkId::new("linear_uniform", name), &cfg, |b, cfg| {
            b.iter(|| black_box(run_replications(&linear, cfg, &data.observations, &oracle).unwrap()))
        });
    }

    let sv = StochVolModel::default();
    let data = generate_dataset(&sv, &base).unwrap();
    let oracle = compute_oracle(&sv, &base, &data.observations).unwrap();
    for (name, exec) in MODES {
        let cfg = cfg(exec);
        group.bench_with_input(BenchmarkId::new("stoch_vol", name), &cfg, |b, cfg| {
            b.iter(|| black_box(run_replications(&sv, cfg, &data.observations, &oracle).unwrap()))
        });
    }
    group.finish();
}

fn exact_sigma(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_sigma");
    group.sample_size(10);
    let z: Vec<usize> = (0..16).map(|k| (k * 7 + 3) % 5 % 2).collect();
    let diag = ExactDiagnostics::new(&DiscreteHmmModel::two_state(), &z).unwrap();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("T16", name), |b| {
            b.iter(|| black_box(diag.sigma(SigmaTarget::FilterEstimate, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, replications, exact_sigma);
criterion_main!(benches);
