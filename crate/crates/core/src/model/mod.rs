//! State-space models.
//!
//! A model supplies samplers for the law of the first hidden state, the
//! Markov transition, and the observation, plus the observation
//! log-density that the bootstrap filter uses as its incremental weight.
//! All densities are natural logs; `f64::NEG_INFINITY` encodes zero.

mod discrete_hmm;
mod linear_uniform;
mod stoch_vol;

use std::fmt;
use std::ops::{Deref, DerefMut};

use rand::Rng;

use crate::error::Result;

pub use discrete_hmm::DiscreteHmmModel;
pub use linear_uniform::LinearUniformModel;
pub use stoch_vol::StochVolModel;

/// Real-valued hidden state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector(pub Vec<f64>);

/// Real-valued measurement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation(pub Vec<f64>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl $name {
            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

vector_newtype!(StateVector);
vector_newtype!(Observation);

/// A hidden Markov model `x_k ~ p(.|x_{k-1})`, `z_k ~ p(.|x_k)`.
///
/// `sample_initial` draws the first hidden state `x_1`. Each state has a
/// real embedding of length `state_dim()` used for estimates and output.
pub trait StateSpaceModel: Send + Sync {
    type State: Clone + Send + Sync + fmt::Debug;
    type Obs: Clone + Send + Sync + fmt::Debug;

    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    fn sample_transition<R: Rng + ?Sized>(&self, x: &Self::State, rng: &mut R) -> Self::State;
    fn sample_observation<R: Rng + ?Sized>(&self, x: &Self::State, rng: &mut R) -> Self::Obs;

    fn observation_logdensity(&self, x: &Self::State, z: &Self::Obs) -> f64;

    /// Transition log-density, when the model can evaluate it.
    fn transition_logdensity(&self, _from: &Self::State, _to: &Self::State) -> Option<f64> {
        None
    }

    /// True only for models whose posteriors can be computed exactly.
    fn exact_support(&self) -> bool {
        false
    }

    /// Exact `E[x_T | z_{1:T}]`, when available.
    fn exact_conditional_mean(&self, _observations: &[Self::Obs]) -> Option<Result<StateVector>> {
        None
    }

    fn write_state(&self, x: &Self::State, out: &mut [f64]);
    fn write_observation(&self, z: &Self::Obs, out: &mut [f64]);
    fn observation_from_values(&self, values: &[f64]) -> Result<Self::Obs>;

    fn state_values(&self, x: &Self::State) -> StateVector {
        let mut out = StateVector::zeros(self.state_dim());
        self.write_state(x, &mut out);
        out
    }

    fn observation_values(&self, z: &Self::Obs) -> Vec<f64> {
        let mut out = vec![0.0; self.obs_dim()];
        self.write_observation(z, &mut out);
        out
    }
}

/// A simulated hidden trajectory and its measurements, both of length T.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S, O> {
    pub states: Vec<S>,
    pub observations: Vec<O>,
}

impl<S, O> Trajectory<S, O> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Draws `x_{1:T}` and `z_{1:T}` from the model's joint law.
pub fn simulate_trajectory<M, R>(
    model: &M,
    horizon: usize,
    rng: &mut R,
) -> Trajectory<M::State, M::Obs>
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    let mut states = Vec::with_capacity(horizon);
    let mut observations = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let x = if k == 0 {
            model.sample_initial(rng)
        } else {
            model.sample_transition(&states[k - 1], rng)
        };
        observations.push(model.sample_observation(&x, rng));
        states.push(x);
    }
    Trajectory {
        states,
        observations,
    }
}

pub(crate) fn check_len(what: &str, values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(crate::Error::InvalidArgument(format!(
            "{what} has {} components, expected {expected}",
            values.len()
        )));
    }
    Ok(())
}
