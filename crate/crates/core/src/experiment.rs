//! Replication harness for the scaled-error experiments.
//!
//! One experiment fixes a dataset, computes a reference conditional mean
//! (exact when the model allows it, otherwise a high-particle-count run),
//! then runs `R` independent filters on the same observations. Each
//! replication `r` draws from stream `r` of the master seed, and results
//! are placed by replication index, so sequential and parallel execution
//! give identical reports.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::run_filter_seeded;
use crate::model::{
    simulate_trajectory, DiscreteHmmModel, StateSpaceModel, StateVector, Trajectory,
};
use crate::rng::{
    substream, SeedRecord, DATA_STREAM, ORACLE_STREAM, REGEN_DATA_OFFSET, REGEN_ORACLE_OFFSET,
};
use crate::stats::{self, Histogram, Matrix, NormalityResult};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    LinearUniform,
    StochVol { mu: Vec<f64>, phi: f64 },
    DiscreteHmm(DiscreteHmmModel),
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::LinearUniform => "linear_uniform",
            ModelConfig::StochVol { .. } => "stoch_vol",
            ModelConfig::DiscreteHmm(_) => "discrete_hmm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub horizon: usize,
    pub particles: usize,
    pub oracle_particles: usize,
    pub reps: usize,
    pub master_seed: Option<u64>,
    pub bins: usize,
    pub retain_diagnostics: bool,
    pub regenerate_data: bool,
    pub m_list: Vec<usize>,
    pub output: PathBuf,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::LinearUniform,
            horizon: 25,
            particles: 1000,
            oracle_particles: 100_000,
            reps: 500,
            master_seed: None,
            bins: DEFAULT_BINS,
            retain_diagnostics: false,
            regenerate_data: false,
            m_list: vec![500, 2000],
            output: PathBuf::from("out"),
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn seed(&self) -> Result<u64> {
        self.master_seed
            .ok_or_else(|| Error::InvalidArgument("a master seed is required".into()))
    }

    /// Checks the invariants shared by every subcommand. Returns the
    /// offending key on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.particles < 1 {
            return Err(("m", "must be at least 1".into()));
        }
        if self.oracle_particles < self.particles {
            return Err((
                "m_oracle",
                format!("must be at least m = {}", self.particles),
            ));
        }
        if self.reps < 2 {
            return Err(("R", "must be at least 2".into()));
        }
        if self.horizon < 1 {
            return Err(("T", "must be at least 1".into()));
        }
        if self.bins < 1 {
            return Err(("bins", "must be at least 1".into()));
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(("m_list", "needs positive particle counts".into()));
        }
        Ok(())
    }
}

/// One row of the scaled error matrix; `error` is `None` for a collapsed run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    pub rep: usize,
    pub stream: u64,
    pub error: Option<Vec<f64>>,
}

impl ErrorSample {
    pub fn collapsed(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model: &'static str,
    pub horizon: usize,
    pub particles: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub oracle: StateVector,
    pub errors: Vec<ErrorSample>,
    pub normality: Vec<Option<NormalityResult>>,
    pub sigma_hat: Matrix,
    pub mean_error: Vec<f64>,
    pub collapses: usize,
    pub histograms: Vec<Histogram>,
    pub wall_clock: Duration,
}

impl ExperimentReport {
    pub fn used_rows(&self) -> Vec<Vec<f64>> {
        self.errors.iter().filter_map(|e| e.error.clone()).collect()
    }

    pub fn components(&self) -> usize {
        self.oracle.dim()
    }

    pub fn non_rejections(&self) -> usize {
        self.normality
            .iter()
            .filter(|r| r.is_some_and(|r| !r.reject_at_05))
            .count()
    }
}

/// The fixed dataset of an experiment, drawn from stream 0.
pub fn generate_dataset<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
) -> Result<Trajectory<M::State, M::Obs>> {
    let seed = cfg.seed()?;
    Ok(simulate_trajectory(
        model,
        cfg.horizon,
        &mut substream(seed, DATA_STREAM),
    ))
}

/// Reference value of `E[x_T | z_{1:T}]`.
pub fn compute_oracle<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
    observations: &[M::Obs],
) -> Result<StateVector> {
    let seed = cfg.seed()?;
    oracle_on_stream(
        model,
        observations,
        cfg.oracle_particles,
        SeedRecord::new(seed, ORACLE_STREAM),
    )
}

/// Exact conditional mean when available, else the final estimate of a
/// filter run with `m` particles on the given stream.
pub fn oracle_on_stream<M: StateSpaceModel>(
    model: &M,
    observations: &[M::Obs],
    m: usize,
    seed: SeedRecord,
) -> Result<StateVector> {
    if let Some(exact) = model.exact_conditional_mean(observations) {
        return exact;
    }
    let run = run_filter_seeded(model, observations, m, seed, false)?;
    Ok(run.final_estimate().clone())
}

fn scaled_error(estimate: &StateVector, oracle: &StateVector, m: usize) -> Vec<f64> {
    let scale = (m as f64).sqrt();
    estimate
        .iter()
        .zip(oracle.iter())
        .map(|(e, o)| scale * (e - o))
        .collect()
}

fn one_replication<M: StateSpaceModel>(
    model: &M,
    observations: &[M::Obs],
    oracle: &StateVector,
    m: usize,
    seed: SeedRecord,
) -> Result<Option<Vec<f64>>> {
    match run_filter_seeded(model, observations, m, seed, false) {
        Ok(run) => Ok(Some(scaled_error(run.final_estimate(), oracle, m))),
        Err(Error::WeightCollapse { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `R` filter runs on the same observations with streams `1..=R`.
pub fn run_replications<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
    observations: &[M::Obs],
    oracle: &StateVector,
) -> Result<ExperimentReport> {
    let streams: Vec<u64> = (1..=cfg.reps as u64).collect();
    run_replications_on_streams(model, cfg, cfg.particles, observations, oracle, &streams)
}

/// Replications on explicit stream indices, one per entry of `streams`.
pub fn run_replications_on_streams<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
    m: usize,
    observations: &[M::Obs],
    oracle: &StateVector,
    streams: &[u64],
) -> Result<ExperimentReport> {
    let seed = cfg.seed()?;
    let started = Instant::now();
    let results = cfg.execution.map(streams.len(), |r| {
        one_replication(
            model,
            observations,
            oracle,
            m,
            SeedRecord::new(seed, streams[r]),
        )
    });
    let mut errors = Vec::with_capacity(streams.len());
    for (r, res) in results.into_iter().enumerate() {
        errors.push(ErrorSample {
            rep: r + 1,
            stream: streams[r],
            error: res?,
        });
    }
    assemble(model.name(), cfg, m, seed, oracle.clone(), errors, started)
}

/// Replications that each draw a fresh dataset and reference mean.
pub fn run_regenerated_replications<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let seed = cfg.seed()?;
    let started = Instant::now();
    let m = cfg.particles;
    let results = cfg.execution.map(cfg.reps, |r| {
        let r = r as u64 + 1;
        let traj = simulate_trajectory(
            model,
            cfg.horizon,
            &mut substream(seed, REGEN_DATA_OFFSET + r),
        );
        let oracle = oracle_on_stream(
            model,
            &traj.observations,
            cfg.oracle_particles,
            SeedRecord::new(seed, REGEN_ORACLE_OFFSET + r),
        );
        match oracle {
            Ok(o) => one_replication(model, &traj.observations, &o, m, SeedRecord::new(seed, r)),
            Err(Error::WeightCollapse { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut errors = Vec::with_capacity(cfg.reps);
    for (r, res) in results.into_iter().enumerate() {
        errors.push(ErrorSample {
            rep: r + 1,
            stream: r as u64 + 1,
            error: res?,
        });
    }
    let oracle = StateVector::zeros(model.state_dim());
    assemble(model.name(), cfg, m, seed, oracle, errors, started)
}

fn assemble(
    model: &'static str,
    cfg: &ExperimentConfig,
    m: usize,
    seed: u64,
    oracle: StateVector,
    errors: Vec<ErrorSample>,
    started: Instant,
) -> Result<ExperimentReport> {
    let reps = errors.len();
    let collapses = errors.iter().filter(|e| e.collapsed()).count();
    let rows: Vec<Vec<f64>> = errors.iter().filter_map(|e| e.error.clone()).collect();
    if collapses * 2 > reps || rows.len() < 2 {
        return Err(Error::ExperimentDegenerate { collapses, reps });
    }
    let dim = rows[0].len();
    let sigma_hat = stats::sample_covariance(&rows)?;
    let mean_error = stats::column_means(&rows);
    let mut normality = Vec::with_capacity(dim);
    let mut histograms = Vec::with_capacity(dim);
    for c in 0..dim {
        let column: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        normality.push(stats::jarque_bera(&column).ok());
        histograms.push(stats::histogram(&column, cfg.bins)?);
    }
    Ok(ExperimentReport {
        model,
        horizon: cfg.horizon,
        particles: m,
        reps,
        master_seed: seed,
        oracle,
        errors,
        normality,
        sigma_hat,
        mean_error,
        collapses,
        histograms,
        wall_clock: started.elapsed(),
    })
}

/// Dataset, reference mean, and replication report for one configuration.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome<S, O> {
    pub dataset: Trajectory<S, O>,
    pub report: ExperimentReport,
}

pub fn run_experiment<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome<M::State, M::Obs>> {
    let dataset = generate_dataset(model, cfg)?;
    let report = if cfg.regenerate_data {
        run_regenerated_replications(model, cfg)?
    } else {
        let oracle = compute_oracle(model, cfg, &dataset.observations)?;
        run_replications(model, cfg, &dataset.observations, &oracle)?
    };
    Ok(ExperimentOutcome { dataset, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub particles: usize,
    pub sigma_hat: Matrix,
    /// Diagonal of `sigma_hat / m`: the variance of the unscaled error.
    pub unscaled_variance: Vec<f64>,
    pub collapses: usize,
}

/// `Sigma_hat` at each particle count, every count reusing streams `1..=R`.
pub fn scaling_check<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
    observations: &[M::Obs],
    oracle: &StateVector,
    m_list: &[usize],
) -> Result<Vec<ScalingRow>> {
    if m_list.is_empty() {
        return Err(Error::InvalidArgument("m_list must not be empty".into()));
    }
    let streams: Vec<u64> = (1..=cfg.reps as u64).collect();
    m_list
        .iter()
        .map(|&m| {
            let report = run_replications_on_streams(model, cfg, m, observations, oracle, &streams)?;
            let unscaled_variance = (0..report.sigma_hat.len())
                .map(|i| report.sigma_hat[i][i] / m as f64)
                .collect();
            Ok(ScalingRow {
                particles: m,
                sigma_hat: report.sigma_hat,
                unscaled_variance,
                collapses: report.collapses,
            })
        })
        .collect()
}
