use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_len, Observation, StateSpaceModel, StateVector};
use crate::error::{Error, Result};

/// Multivariate stochastic volatility model with diagonal persistence.
///
/// `x_{k+1} = mu + phi (x_k - mu) + w_k` and `z_k = diag(exp(x_k / 2)) v_k`
/// with standard normal `w_k`, `v_k`. The first state is drawn from the
/// stationary law `N(mu, I / (1 - phi^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochVolModel {
    mu: Vec<f64>,
    phi: f64,
    noise_scale: f64,
}

impl Default for StochVolModel {
    fn default() -> Self {
        Self::new(vec![0.0; 3], 0.5).expect("default parameters are valid")
    }
}

impl StochVolModel {
    pub fn new(mu: Vec<f64>, phi: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidModel("stochastic volatility needs p >= 1".into()));
        }
        if phi.is_nan() || phi.abs() >= 1.0 {
            return Err(Error::InvalidModel(format!(
                "phi = {phi} is not stationary (|phi| < 1 required)"
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("mu must be finite".into()));
        }
        Ok(Self {
            mu,
            phi,
            noise_scale: 1.0,
        })
    }

    /// Disables both noise sources in the samplers. Densities are unchanged.
    pub fn with_zero_noise(mut self) -> Self {
        self.noise_scale = 0.0;
        self
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn stationary_variance(&self) -> f64 {
        1.0 / (1.0 - self.phi * self.phi)
    }

    fn normal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        e * self.noise_scale
    }
}

impl StateSpaceModel for StochVolModel {
    type State = StateVector;
    type Obs = Observation;

    fn name(&self) -> &'static str {
        "stoch_vol"
    }

    fn state_dim(&self) -> usize {
        self.mu.len()
    }

    fn obs_dim(&self) -> usize {
        self.mu.len()
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        let sd = self.stationary_variance().sqrt();
        StateVector(self.mu.iter().map(|m| m + sd * self.normal(rng)).collect())
    }

    fn sample_transition<R: Rng + ?Sized>(&self, x: &StateVector, rng: &mut R) -> StateVector {
        StateVector(
            self.mu
                .iter()
                .zip(x.iter())
                .map(|(m, xi)| m + self.phi * (xi - m) + self.normal(rng))
                .collect(),
        )
    }

    fn sample_observation<R: Rng + ?Sized>(&self, x: &StateVector, rng: &mut R) -> Observation {
        Observation(x.iter().map(|xi| (0.5 * xi).exp() * self.normal(rng)).collect())
    }

    fn observation_logdensity(&self, x: &StateVector, z: &Observation) -> f64 {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        x.iter()
            .zip(z.iter())
            .map(|(xi, zi)| -half_log_2pi - 0.5 * xi - 0.5 * zi * zi * (-xi).exp())
            .sum()
    }

    fn transition_logdensity(&self, from: &StateVector, to: &StateVector) -> Option<f64> {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        Some(
            self.mu
                .iter()
                .zip(from.iter().zip(to.iter()))
                .map(|(m, (a, b))| {
                    let r = b - m - self.phi * (a - m);
                    -half_log_2pi - 0.5 * r * r
                })
                .sum(),
        )
    }

    fn write_state(&self, x: &StateVector, out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn write_observation(&self, z: &Observation, out: &mut [f64]) {
        out.copy_from_slice(z);
    }

    fn observation_from_values(&self, values: &[f64]) -> Result<Observation> {
        check_len("observation", values, self.dim())?;
        Ok(Observation(values.to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn defaults() {
        let m = StochVolModel::default();
        assert_eq!(m.mu(), &[0.0, 0.0, 0.0]);
        assert_eq!(m.phi(), 0.5);
        assert!((m.stationary_variance() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_explosive_phi() {
        assert!(StochVolModel::new(vec![0.0], 1.0).is_err());
        assert!(StochVolModel::new(vec![], 0.5).is_err());
    }

    #[test]
    fn zero_noise_fixed_point_at_mean() {
        let m = StochVolModel::new(vec![0.3, -1.0, 2.0], 0.5)
            .unwrap()
            .with_zero_noise();
        let x = StateVector(vec![0.3, -1.0, 2.0]);
        assert_eq!(m.sample_transition(&x, &mut substream(1, 0)), x);
    }

    #[test]
    fn density_at_origin_is_standard_trivariate_normal() {
        let m = StochVolModel::default();
        let lp = m.observation_logdensity(&StateVector::zeros(3), &Observation::zeros(3));
        let expected = -1.5 * (2.0 * PI).ln();
        assert!((lp - expected).abs() < 1e-14);
        assert!((lp + 2.756_815_599_614_018).abs() < 1e-12);
    }

    #[test]
    fn observation_variance_is_exp_state() {
        let m = StochVolModel::new(vec![0.0], 0.5).unwrap();
        let x = StateVector(vec![0.8]);
        let mut rng = substream(2, 0);
        let n = 200_000;
        let var = (0..n)
            .map(|_| m.sample_observation(&x, &mut rng)[0].powi(2))
            .sum::<f64>()
            / n as f64;
        // sd of the estimator is sqrt(2) * e^0.8 / sqrt(n) ~ 0.007
        assert!((var - 0.8f64.exp()).abs() < 0.03, "{var}");
    }

    #[test]
    fn observation_density_integrates_to_one_on_a_slice() {
        let m = StochVolModel::new(vec![0.0], 0.5).unwrap();
        let x = StateVector(vec![1.3]);
        let n = 60_000;
        let (lo, hi) = (-20.0, 20.0);
        let h = (hi - lo) / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let z = Observation(vec![lo + (i as f64 + 0.5) * h]);
                m.observation_logdensity(&x, &z).exp() * h
            })
            .sum();
        assert!((integral - 1.0).abs() < 1e-8, "{integral}");
    }
}
