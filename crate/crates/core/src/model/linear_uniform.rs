use rand::Rng;

use super::{check_len, Observation, StateSpaceModel, StateVector};
use crate::error::Result;

const TRANSITION: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
const OBSERVATION: [[f64; 3]; 2] = [[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]];

/// Linear dynamics with independent `U[-1, 1]` process and measurement noise.
///
/// `x_{k+1} = A x_k + w_k`, `z_k = C x_k + v_k`, started from `x_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearUniformModel {
    transition: [[f64; 3]; 3],
    observation: [[f64; 3]; 2],
    half_width: f64,
    initial_state: [f64; 3],
    noise_scale: f64,
}

impl Default for LinearUniformModel {
    fn default() -> Self {
        Self {
            transition: TRANSITION,
            observation: OBSERVATION,
            half_width: 1.0,
            initial_state: [0.0; 3],
            noise_scale: 1.0,
        }
    }
}

impl LinearUniformModel {
    /// Disables both noise sources in the samplers. Densities are unchanged.
    pub fn with_zero_noise(mut self) -> Self {
        self.noise_scale = 0.0;
        self
    }

    pub fn transition_matrix(&self) -> &[[f64; 3]; 3] {
        &self.transition
    }

    pub fn observation_matrix(&self) -> &[[f64; 3]; 2] {
        &self.observation
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn apply_transition(&self, x: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, row) in out.iter_mut().zip(&self.transition) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn apply_observation(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, row) in out.iter_mut().zip(&self.observation) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    fn noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random_range(-self.half_width..=self.half_width);
        u * self.noise_scale
    }

    fn step_from<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> StateVector {
        let mean = self.apply_transition(x);
        StateVector(mean.iter().map(|m| m + self.noise(rng)).collect())
    }
}

impl StateSpaceModel for LinearUniformModel {
    type State = StateVector;
    type Obs = Observation;

    fn name(&self) -> &'static str {
        "linear_uniform"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        self.step_from(&self.initial_state, rng)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, x: &StateVector, rng: &mut R) -> StateVector {
        self.step_from(x, rng)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, x: &StateVector, rng: &mut R) -> Observation {
        let mean = self.apply_observation(x);
        Observation(mean.iter().map(|m| m + self.noise(rng)).collect())
    }

    fn observation_logdensity(&self, x: &StateVector, z: &Observation) -> f64 {
        let mean = self.apply_observation(x);
        let inside = mean
            .iter()
            .zip(z.iter())
            .all(|(m, zi)| (zi - m).abs() <= self.half_width);
        if inside {
            -2.0 * (2.0 * self.half_width).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn transition_logdensity(&self, from: &StateVector, to: &StateVector) -> Option<f64> {
        let mean = self.apply_transition(from);
        let inside = mean
            .iter()
            .zip(to.iter())
            .all(|(m, x)| (x - m).abs() <= self.half_width);
        Some(if inside {
            -3.0 * (2.0 * self.half_width).ln()
        } else {
            f64::NEG_INFINITY
        })
    }

    fn write_state(&self, x: &StateVector, out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn write_observation(&self, z: &Observation, out: &mut [f64]) {
        out.copy_from_slice(z);
    }

    fn observation_from_values(&self, values: &[f64]) -> Result<Observation> {
        check_len("observation", values, 2)?;
        Ok(Observation(values.to_vec()))
    }
}
