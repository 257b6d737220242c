//! Command-line front end: argument parsing, subcommand dispatch, and CSV output.
//!
//! Every floating-point value is written with 17 significant digits and no
//! output file depends on timing, so a fixed configuration and seed always
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{parse_config, ConfigError};
use crate::exact::{theoretical_estimator, ExactDiagnostics, SigmaTarget};
use crate::experiment::{
    compute_oracle, generate_dataset, run_experiment, scaling_check, ExperimentConfig,
    ExperimentReport, ModelConfig,
};
use crate::filter::run_filter_seeded;
use crate::model::{
    DiscreteHmmModel, LinearUniformModel, StateSpaceModel, StochVolModel, Trajectory,
};
use crate::rng::SeedRecord;
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "pfclt",
    version,
    about = "Bootstrap particle filter and empirical checks of its scaled-error normality"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// linear_uniform, stoch_vol, or discrete_hmm.
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    #[arg(long, value_name = "M")]
    pub particles: Option<usize>,
    #[arg(long, value_name = "M")]
    pub oracle_particles: Option<usize>,
    #[arg(long, value_name = "R")]
    pub reps: Option<usize>,
    #[arg(long, value_name = "T")]
    pub horizon: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run replications on the current thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one dataset and write dataset.csv.
    Simulate(CommonArgs),
    /// Run one filter over a simulated dataset and write estimates.csv.
    Filter(CommonArgs),
    /// Full replication experiment: errors.csv, report.csv, hist_component_k.csv.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        bins: Option<usize>,
        /// Draw a new dataset and reference mean for every replication.
        #[arg(long)]
        regenerate_data: bool,
    },
    /// Discrete model: filter against the exact posterior mean and the
    /// evidence-normalized identity.
    OracleCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 50)]
        runs: usize,
    },
    /// Discrete model: exact asymptotic covariance against the empirical one.
    SigmaCheck(CommonArgs),
    /// Empirical covariance of the scaled error at several particle counts.
    Scaling {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', value_name = "M,M,...")]
        m_list: Option<Vec<usize>>,
    },
}

/// Everything needed to execute one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub config_path: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub runs: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(e) => e.kind(),
            CliError::Run(e) => match e {
                Error::WeightCollapse { .. } => "WeightCollapse",
                Error::UnknownSymbol { .. } => "UnknownSymbol",
                Error::EnumerationTooLarge { .. } => "EnumerationTooLarge",
                Error::MissingHistory => "MissingHistory",
                Error::DegenerateSample(_) => "DegenerateSample",
                Error::ExperimentDegenerate { .. } => "ExperimentDegenerate",
                Error::InvalidModel(_) => "InvalidModel",
                Error::InvalidArgument(_) => "InvalidArgument",
            },
            CliError::Io { .. } => "IoError",
        }
    }

    /// Single-line, machine-readable rendering for stderr.
    pub fn error_line(&self) -> String {
        format!("error kind={} message={:?}", self.kind(), self.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(c) | Command::Filter(c) | Command::SigmaCheck(c) => c,
            Command::Experiment { common, .. }
            | Command::OracleCheck { common, .. }
            | Command::Scaling { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Filter(_) => "filter",
            Command::Experiment { .. } => "experiment",
            Command::OracleCheck { .. } => "oracle-check",
            Command::SigmaCheck(_) => "sigma-check",
            Command::Scaling { .. } => "scaling",
        }
    }
}

impl RunManifest {
    pub fn from_command(cmd: &Command) -> Self {
        let c = cmd.common();
        let mut overrides = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                overrides.push((key.to_string(), v));
            }
        };
        push("seed", c.seed.map(|v| v.to_string()));
        push("model", c.model.clone());
        push("m", c.particles.map(|v| v.to_string()));
        push("m_oracle", c.oracle_particles.map(|v| v.to_string()));
        push("R", c.reps.map(|v| v.to_string()));
        push("T", c.horizon.map(|v| v.to_string()));
        push("out", c.out.as_ref().map(|p| p.display().to_string()));
        if c.sequential {
            push("execution", Some("sequential".into()));
        }
        let mut runs = 0;
        match cmd {
            Command::Experiment {
                bins,
                regenerate_data,
                ..
            } => {
                push("bins", bins.map(|v| v.to_string()));
                if *regenerate_data {
                    push("regenerate_data", Some("true".into()));
                }
            }
            Command::Scaling { m_list, .. } => push(
                "m_list",
                m_list.as_ref().map(|l| {
                    l.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
                }),
            ),
            Command::OracleCheck { runs: r, .. } => runs = *r,
            _ => {}
        }
        Self {
            subcommand: cmd.name(),
            config_path: c.config.clone(),
            overrides,
            runs,
        }
    }
}

/// Parses the configuration and runs the subcommand. Returns the files written.
pub fn dispatch(manifest: &RunManifest) -> CliResult<Vec<PathBuf>> {
    let cfg = parse_config(manifest.config_path.as_deref(), &manifest.overrides)?;
    cfg.seed()?;
    fs::create_dir_all(&cfg.output).map_err(|source| CliError::Io {
        path: cfg.output.clone(),
        source,
    })?;
    match manifest.subcommand {
        "oracle-check" => return oracle_check(&discrete_model(&cfg), &cfg, manifest.runs.max(1)),
        "sigma-check" => return sigma_check(&discrete_model(&cfg), &cfg),
        _ => {}
    }
    match &cfg.model {
        ModelConfig::LinearUniform => run_generic(manifest, &cfg, &LinearUniformModel::default()),
        ModelConfig::StochVol { mu, phi } => {
            let model = StochVolModel::new(mu.clone(), *phi)?;
            run_generic(manifest, &cfg, &model)
        }
        ModelConfig::DiscreteHmm(model) => run_generic(manifest, &cfg, model),
    }
}

fn discrete_model(cfg: &ExperimentConfig) -> DiscreteHmmModel {
    match &cfg.model {
        ModelConfig::DiscreteHmm(m) => m.clone(),
        _ => DiscreteHmmModel::two_state(),
    }
}

fn run_generic<M: StateSpaceModel>(
    manifest: &RunManifest,
    cfg: &ExperimentConfig,
    model: &M,
) -> CliResult<Vec<PathBuf>> {
    match manifest.subcommand {
        "simulate" => simulate(model, cfg),
        "filter" => filter(model, cfg),
        "experiment" => experiment(model, cfg),
        "scaling" => scaling(model, cfg),
        other => Err(Error::InvalidArgument(format!("unknown subcommand `{other}`")).into()),
    }
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, body: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn numbered(prefix: &str, n: usize) -> String {
    (1..=n)
        .map(|i| format!("{prefix}_{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f).collect::<Vec<_>>().join(",")
}

pub fn dataset_csv<M: StateSpaceModel>(model: &M, data: &Trajectory<M::State, M::Obs>) -> String {
    let mut out = format!(
        "step,{},{}\n",
        numbered("state", model.state_dim()),
        numbered("obs", model.obs_dim())
    );
    for (k, (x, z)) in data.states.iter().zip(&data.observations).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            k + 1,
            join(model.state_values(x).0),
            join(model.observation_values(z))
        );
    }
    out
}

fn simulate<M: StateSpaceModel>(model: &M, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let data = generate_dataset(model, cfg)?;
    Ok(vec![write_file(&cfg.output, "dataset.csv", &dataset_csv(model, &data))?])
}

fn filter<M: StateSpaceModel>(model: &M, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let seed = cfg.seed()?;
    let data = generate_dataset(model, cfg)?;
    let run = run_filter_seeded(
        model,
        &data.observations,
        cfg.particles,
        SeedRecord::new(seed, 1),
        false,
    )?;
    let mut out = format!(
        "step,{},{},log_alpha_bar\n",
        numbered("state", model.state_dim()),
        numbered("estimate", model.state_dim())
    );
    for (k, (est, la)) in run.estimates.iter().zip(&run.log_alpha_bars).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            k + 1,
            join(model.state_values(&data.states[k]).0),
            join(est.0.iter().copied()),
            fmt_f(*la)
        );
    }
    Ok(vec![
        write_file(&cfg.output, "dataset.csv", &dataset_csv(model, &data))?,
        write_file(&cfg.output, "estimates.csv", &out)?,
    ])
}

pub fn errors_csv(report: &ExperimentReport) -> String {
    let n = report.components();
    let mut out = format!("rep,{},collapsed\n", numbered("component", n));
    for e in &report.errors {
        let cells = match &e.error {
            Some(v) => join(v.iter().copied()),
            None => vec!["nan"; n].join(","),
        };
        let _ = writeln!(out, "{},{},{}", e.rep, cells, u8::from(e.collapsed()));
    }
    out
}

pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("metric,index,value\n");
    let mut row = |metric: &str, index: String, value: String| {
        let _ = writeln!(out, "{metric},{index},{value}");
    };
    row("reps", String::new(), report.reps.to_string());
    row("collapses", String::new(), report.collapses.to_string());
    row("particles", String::new(), report.particles.to_string());
    row("horizon", String::new(), report.horizon.to_string());
    row("master_seed", String::new(), report.master_seed.to_string());
    for (c, nr) in report.normality.iter().enumerate() {
        let i = (c + 1).to_string();
        row("oracle_mean", i.clone(), fmt_f(report.oracle[c]));
        row("mean_error", i.clone(), fmt_f(report.mean_error[c]));
        match nr {
            Some(r) => {
                row("skewness", i.clone(), fmt_f(r.skewness));
                row("excess_kurtosis", i.clone(), fmt_f(r.excess_kurtosis));
                row("jb_stat", i.clone(), fmt_f(r.jb_stat));
                row("jb_p_value", i.clone(), fmt_f(r.p_value));
                row("reject_at_05", i, u8::from(r.reject_at_05).to_string());
            }
            None => row("jb_p_value", i, "nan".into()),
        }
    }
    for (i, r) in report.sigma_hat.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            row("sigma_hat", format!("{}:{}", i + 1, j + 1), fmt_f(*v));
        }
    }
    out
}

fn experiment<M: StateSpaceModel>(model: &M, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let outcome = run_experiment(model, cfg)?;
    let report = &outcome.report;
    let mut written = vec![
        write_file(&cfg.output, "dataset.csv", &dataset_csv(model, &outcome.dataset))?,
        write_file(&cfg.output, "errors.csv", &errors_csv(report))?,
        write_file(&cfg.output, "report.csv", &report_csv(report))?,
    ];
    for (c, h) in report.histograms.iter().enumerate() {
        let mut body = String::from("bin_left,bin_right,count\n");
        for (b, count) in h.counts.iter().enumerate() {
            let _ = writeln!(body, "{},{},{}", fmt_f(h.edges[b]), fmt_f(h.edges[b + 1]), count);
        }
        written.push(write_file(
            &cfg.output,
            &format!("hist_component_{}.csv", c + 1),
            &body,
        )?);
    }
    for (c, nr) in report.normality.iter().enumerate() {
        if let Some(r) = nr {
            println!(
                "component {}: JB = {:.4}, p = {:.4}{}",
                c + 1,
                r.jb_stat,
                r.p_value,
                if r.reject_at_05 { " (reject at 0.05)" } else { "" }
            );
        }
    }
    eprintln!(
        "{} replications ({} collapsed) in {:.2?}",
        report.reps, report.collapses, report.wall_clock
    );
    Ok(written)
}

fn scaling<M: StateSpaceModel>(model: &M, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let data = generate_dataset(model, cfg)?;
    let oracle = compute_oracle(model, cfg, &data.observations)?;
    let table = scaling_check(model, cfg, &data.observations, &oracle, &cfg.m_list)?;
    let mut out = String::from("m,component,sigma_hat_diag,unscaled_variance,collapses\n");
    for row in &table {
        for (c, v) in row.unscaled_variance.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.particles,
                c + 1,
                fmt_f(row.sigma_hat[c][c]),
                fmt_f(*v),
                row.collapses
            );
        }
    }
    Ok(vec![write_file(&cfg.output, "scaling.csv", &out)?])
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn oracle_check(
    model: &DiscreteHmmModel,
    cfg: &ExperimentConfig,
    runs: usize,
) -> CliResult<Vec<PathBuf>> {
    let seed = cfg.seed()?;
    let data = generate_dataset(model, cfg)?;
    let diag = ExactDiagnostics::new(model, &data.observations)?;
    let t = diag.horizon();
    let exact = diag.u0();
    let mut out = String::from(
        "run,exact_mean,pf_estimate,scaled_error,log_alpha_bar_product,log_evidence,ratio,x_star,identity_violation,median_abs_h_over_g_minus_1\n",
    );
    let mut worst: f64 = 0.0;
    for r in 1..=runs {
        let run = run_filter_seeded(
            model,
            &data.observations,
            cfg.particles,
            SeedRecord::new(seed, r as u64),
            true,
        )?;
        let theo = theoretical_estimator(model, &run, diag.log_z())?;
        let x_hat = run.final_estimate();
        let violation = theo.identity_violation(x_hat);
        worst = worst.max(violation);
        let ratio_errors: Vec<f64> = (0..cfg.particles)
            .map(|i| diag.h_over_g_star(&run, i, t).map(|v| (v - 1.0).abs()))
            .collect::<Result<_, _>>()?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r,
            fmt_f(exact),
            fmt_f(x_hat[0]),
            fmt_f((cfg.particles as f64).sqrt() * (x_hat[0] - exact)),
            fmt_f(run.log_alpha_bar_product()),
            fmt_f(diag.log_z()),
            fmt_f(theo.ratio),
            fmt_f(theo.x_star[0]),
            fmt_f(violation),
            fmt_f(median(ratio_errors))
        );
    }
    println!("max_identity_relative_violation = {worst:.3e}");
    Ok(vec![write_file(&cfg.output, "oracle_check.csv", &out)?])
}

fn sigma_check(model: &DiscreteHmmModel, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let data = generate_dataset(model, cfg)?;
    let diag = ExactDiagnostics::new(model, &data.observations)?;
    let exact = diag.sigma(SigmaTarget::FilterEstimate, cfg.execution)?;
    let theoretical = diag.sigma(SigmaTarget::TheoreticalEstimate, cfg.execution)?;
    let oracle = compute_oracle(model, cfg, &data.observations)?;
    let report = crate::experiment::run_replications(model, cfg, &data.observations, &oracle)?;
    let mut out = String::from("metric,index,value\n");
    let (e, s) = (exact[0][0], report.sigma_hat[0][0]);
    let _ = writeln!(out, "exact_sigma,1:1,{}", fmt_f(e));
    let _ = writeln!(out, "theoretical_estimate_sigma,1:1,{}", fmt_f(theoretical[0][0]));
    let _ = writeln!(out, "sigma_hat,1:1,{}", fmt_f(s));
    let _ = writeln!(out, "relative_difference,1:1,{}", fmt_f((s - e).abs() / e.abs()));
    let _ = writeln!(out, "collapses,,{}", report.collapses);
    println!("exact sigma = {e:.6}, empirical sigma = {s:.6}");
    Ok(vec![write_file(&cfg.output, "sigma_check.csv", &out)?])
}
