//! Bootstrap particle filtering with multinomial resampling at every step,
//! together with the tools to check, empirically and against exact
//! enumeration, that `sqrt(m) (x_hat_T - E[x_T | z_{1:T}])` is
//! asymptotically zero-mean normal.
//!
//! - [`model`]: the state-space model trait and three concrete models.
//! - [`filter`]: particle clouds, weighting, resampling, and full runs.
//! - [`exact`]: forward filtering and exact asymptotic-covariance terms for
//!   finite-state models.
//! - [`stats`]: moments, Jarque-Bera, covariance, histograms.
//! - [`experiment`]: the seeded replication harness.
//! - [`config`] and [`cli`]: the `pfclt` command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod exact;
pub mod exec;
pub mod experiment;
pub mod filter;
pub mod model;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use filter::{run_filter, run_filter_seeded, FilterRun, ParticleCloud, Phase};
pub use model::{
    simulate_trajectory, DiscreteHmmModel, LinearUniformModel, Observation, StateSpaceModel,
    StateVector, StochVolModel,
};
