use rand::Rng;

use super::{check_len, StateSpaceModel, StateVector};
use crate::error::{Error, Result};
use crate::exact::forward_filter;

const ROW_TOLERANCE: f64 = 1e-12;

/// Finite-state hidden Markov model over a finite observation alphabet.
///
/// States are labels `0..S`, each mapped to a real value for estimation.
/// `initial` is the law of the first hidden state `x_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHmmModel {
    values: Vec<f64>,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
    initial_cdf: Vec<f64>,
    transition_cdf: Vec<Vec<f64>>,
    emission_cdf: Vec<Vec<f64>>,
}

impl Default for DiscreteHmmModel {
    fn default() -> Self {
        Self::two_state()
    }
}

fn check_probability_row(what: &str, row: &[f64], len: usize) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidModel(format!(
            "{what} has length {}, expected {len}",
            row.len()
        )));
    }
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::InvalidModel(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    row.iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    // first index whose cumulative mass exceeds u; zero-mass labels are never chosen
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl DiscreteHmmModel {
    pub fn new(
        values: Vec<f64>,
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let s = values.len();
        if s == 0 {
            return Err(Error::InvalidModel("at least one latent state required".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("state values must be finite".into()));
        }
        check_probability_row("initial distribution", &initial, s)?;
        if transition.len() != s {
            return Err(Error::InvalidModel(format!(
                "transition matrix has {} rows, expected {s}",
                transition.len()
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            check_probability_row(&format!("transition row {i}"), row, s)?;
        }
        if emission.len() != s {
            return Err(Error::InvalidModel(format!(
                "emission matrix has {} rows, expected {s}",
                emission.len()
            )));
        }
        let alphabet = emission[0].len();
        if alphabet == 0 {
            return Err(Error::InvalidModel("empty observation alphabet".into()));
        }
        for (i, row) in emission.iter().enumerate() {
            check_probability_row(&format!("emission row {i}"), row, alphabet)?;
        }
        Ok(Self {
            initial_cdf: cumulative(&initial),
            transition_cdf: transition.iter().map(|r| cumulative(r)).collect(),
            emission_cdf: emission.iter().map(|r| cumulative(r)).collect(),
            values,
            initial,
            transition,
            emission,
        })
    }

    /// The two-state, two-symbol reference model with state values 0 and 1.
    pub fn two_state() -> Self {
        Self::new(
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
        )
        .expect("reference model is valid")
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.emission[0].len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn emission(&self) -> &[Vec<f64>] {
        &self.emission
    }

    pub fn emission_prob(&self, state: usize, symbol: usize) -> f64 {
        self.emission[state][symbol]
    }
}

impl StateSpaceModel for DiscreteHmmModel {
    type State = usize;
    type Obs = usize;

    fn name(&self) -> &'static str {
        "discrete_hmm"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.initial_cdf, rng)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, x: &usize, rng: &mut R) -> usize {
        draw(&self.transition_cdf[*x], rng)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, x: &usize, rng: &mut R) -> usize {
        draw(&self.emission_cdf[*x], rng)
    }

    fn observation_logdensity(&self, x: &usize, z: &usize) -> f64 {
        match self.emission[*x].get(*z) {
            Some(p) => p.ln(),
            None => f64::NEG_INFINITY,
        }
    }

    fn transition_logdensity(&self, from: &usize, to: &usize) -> Option<f64> {
        Some(self.transition[*from][*to].ln())
    }

    fn exact_support(&self) -> bool {
        true
    }

    fn exact_conditional_mean(&self, observations: &[usize]) -> Option<Result<StateVector>> {
        Some(forward_filter(self, observations).map(|f| {
            StateVector(vec![*f
                .conditional_means
                .last()
                .expect("forward filter over a non-empty sequence")])
        }))
    }

    fn write_state(&self, x: &usize, out: &mut [f64]) {
        out[0] = self.values[*x];
    }

    fn write_observation(&self, z: &usize, out: &mut [f64]) {
        out[0] = *z as f64;
    }

    fn observation_from_values(&self, values: &[f64]) -> Result<usize> {
        check_len("observation", values, 1)?;
        let v = values[0];
        if v < 0.0 || v.fract() != 0.0 || v >= self.alphabet_size() as f64 {
            return Err(Error::InvalidArgument(format!(
                "{v} is not a symbol of an alphabet of size {}",
                self.alphabet_size()
            )));
        }
        Ok(v as usize)
    }
}
