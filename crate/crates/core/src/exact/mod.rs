//! Exact inference for finite-state models.
//!
//! The forward recursion gives filtering posteriors and the marginal
//! likelihood `p(z_{1:T})`. Everything the asymptotic covariance needs
//! (`g*_k`, `u_k`, and the covariance itself) is then evaluated exactly,
//! with expectations taken under the prior path law that the bootstrap
//! filter proposes from.

mod theoretical;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{DiscreteHmmModel, StateVector};
use crate::stats::Matrix;

pub use theoretical::{
    h_factor, log_h_factor, theoretical_estimator, TheoreticalEstimate,
};

/// Upper bound on the number of latent paths a covariance enumeration may visit.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Filtering posteriors, running log marginal likelihoods, and posterior means.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub posteriors: Vec<Vec<f64>>,
    pub log_marginal: Vec<f64>,
    pub conditional_means: Vec<f64>,
}

impl ForwardResult {
    pub fn log_evidence(&self) -> f64 {
        *self.log_marginal.last().expect("non-empty")
    }
}

fn check_symbols(hmm: &DiscreteHmmModel, z: &[usize]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::InvalidArgument("at least one observation required".into()));
    }
    let alphabet = hmm.alphabet_size();
    if let Some((step, &symbol)) = z.iter().enumerate().find(|(_, s)| **s >= alphabet) {
        return Err(Error::UnknownSymbol {
            step: step + 1,
            symbol,
            alphabet,
        });
    }
    Ok(())
}

/// Normalized forward recursion: predict with the transition matrix, then
/// update with the emission column of the observed symbol.
pub fn forward_filter(hmm: &DiscreteHmmModel, z: &[usize]) -> Result<ForwardResult> {
    check_symbols(hmm, z)?;
    let s = hmm.num_states();
    let mut posteriors = Vec::with_capacity(z.len());
    let mut log_marginal = Vec::with_capacity(z.len());
    let mut conditional_means = Vec::with_capacity(z.len());
    let mut running = 0.0;
    let mut prev: Option<Vec<f64>> = None;
    for &symbol in z {
        let predicted = match &prev {
            None => hmm.initial().to_vec(),
            Some(post) => (0..s)
                .map(|j| (0..s).map(|i| post[i] * hmm.transition()[i][j]).sum())
                .collect(),
        };
        let mut joint: Vec<f64> = predicted
            .iter()
            .enumerate()
            .map(|(j, p)| p * hmm.emission_prob(j, symbol))
            .collect();
        let c: f64 = joint.iter().sum();
        running += c.ln();
        if c > 0.0 {
            joint.iter_mut().for_each(|v| *v /= c);
        }
        conditional_means.push(joint.iter().zip(hmm.values()).map(|(p, v)| p * v).sum());
        log_marginal.push(running);
        posteriors.push(joint.clone());
        prev = Some(joint);
    }
    Ok(ForwardResult {
        posteriors,
        log_marginal,
        conditional_means,
    })
}

/// Which estimator the covariance describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaTarget {
    /// The self-normalized filter estimate: `u_k` is built from the
    /// centered test function `x_T - E[x_T | z_{1:T}]`.
    #[default]
    FilterEstimate,
    /// The estimate normalized by the true evidence: `u_k` as written with
    /// the raw test function `x_T`.
    TheoreticalEstimate,
}

/// Exact diagnostics for one model and one observation sequence.
#[derive(Debug, Clone)]
pub struct ExactDiagnostics {
    hmm: DiscreteHmmModel,
    observations: Vec<usize>,
    forward: ForwardResult,
    /// `E[x_T prod_{l>k} B(x_l, z_l) | x_k = s]`, indexed `[k - 1][s]`.
    backward_value: Vec<Vec<f64>>,
    /// `E[prod_{l>k} B(x_l, z_l) | x_k = s]`, indexed `[k - 1][s]`.
    backward_mass: Vec<Vec<f64>>,
}

impl ExactDiagnostics {
    pub fn new(hmm: &DiscreteHmmModel, z: &[usize]) -> Result<Self> {
        let forward = forward_filter(hmm, z)?;
        let t = z.len();
        let s = hmm.num_states();
        let mut backward_value = vec![vec![0.0; s]; t];
        let mut backward_mass = vec![vec![0.0; s]; t];
        backward_value[t - 1] = hmm.values().to_vec();
        backward_mass[t - 1] = vec![1.0; s];
        for k in (0..t - 1).rev() {
            let symbol = z[k + 1];
            for i in 0..s {
                let (mut value, mut mass) = (0.0, 0.0);
                for j in 0..s {
                    let w = hmm.transition()[i][j] * hmm.emission_prob(j, symbol);
                    value += w * backward_value[k + 1][j];
                    mass += w * backward_mass[k + 1][j];
                }
                backward_value[k][i] = value;
                backward_mass[k][i] = mass;
            }
        }
        Ok(Self {
            hmm: hmm.clone(),
            observations: z.to_vec(),
            forward,
            backward_value,
            backward_mass,
        })
    }

    pub fn model(&self) -> &DiscreteHmmModel {
        &self.hmm
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn horizon(&self) -> usize {
        self.observations.len()
    }

    pub fn forward(&self) -> &ForwardResult {
        &self.forward
    }

    /// `log E[prod alpha] = log p(z_{1:T})`.
    pub fn log_z(&self) -> f64 {
        self.forward.log_evidence()
    }

    /// `u_0 = E[x_T | z_{1:T}]`.
    pub fn u0(&self) -> f64 {
        *self.forward.conditional_means.last().expect("non-empty")
    }

    fn check_path(&self, path: &[usize]) -> Result<()> {
        if path.len() > self.horizon() {
            return Err(Error::InvalidArgument(format!(
                "path of length {} exceeds horizon {}",
                path.len(),
                self.horizon()
            )));
        }
        if let Some(&bad) = path.iter().find(|&&s| s >= self.hmm.num_states()) {
            return Err(Error::InvalidArgument(format!("state {bad} out of range")));
        }
        Ok(())
    }

    /// `sum_l log p(z_l | x_l)` over the path.
    pub fn log_path_likelihood(&self, path: &[usize]) -> f64 {
        path.iter()
            .zip(&self.observations)
            .map(|(&x, &z)| self.hmm.emission_prob(x, z).ln())
            .sum()
    }

    /// `log g*_k(x_{1:k}) = log p(z_{1:k}) - sum_l log p(z_l | x_l)`.
    pub fn log_g_star(&self, path: &[usize]) -> Result<f64> {
        self.check_path(path)?;
        if path.is_empty() {
            return Ok(0.0);
        }
        let lp = self.log_path_likelihood(path);
        if lp == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        Ok(self.forward.log_marginal[path.len() - 1] - lp)
    }

    /// `g*_k(x_{1:k})`; `+inf` when the path has zero likelihood.
    pub fn g_star(&self, path: &[usize]) -> Result<f64> {
        Ok(self.log_g_star(path)?.exp())
    }

    /// `u_k(x_{1:k}) = E[x_T L_T | x_{1:k}]`, with `u_0` the conditional mean.
    pub fn u_function(&self, path: &[usize]) -> Result<StateVector> {
        self.check_path(path)?;
        Ok(StateVector(vec![self.u_centered(path, 0.0)]))
    }

    fn u_centered(&self, path: &[usize], center: f64) -> f64 {
        match path.last() {
            None => self.u0() - center,
            Some(&last) => {
                let k = path.len();
                let lp = self.log_path_likelihood(path);
                if lp == f64::NEG_INFINITY {
                    return 0.0;
                }
                let tail = self.backward_value[k - 1][last] - center * self.backward_mass[k - 1][last];
                (lp - self.log_z()).exp() * tail
            }
        }
    }

    /// Asymptotic covariance of the scaled filter error, by enumeration.
    pub fn sigma(&self, target: SigmaTarget, exec: Execution) -> Result<Matrix> {
        let s = self.hmm.num_states();
        let t = self.horizon();
        let paths = (s as f64).powi(t as i32);
        if paths > ENUMERATION_LIMIT as f64 {
            return Err(Error::EnumerationTooLarge {
                paths,
                limit: ENUMERATION_LIMIT,
            });
        }
        let center = match target {
            SigmaTarget::FilterEstimate => self.u0(),
            SigmaTarget::TheoreticalEstimate => 0.0,
        };

        // split the path tree into independent subtrees at a fixed depth
        let mut depth = 1;
        while depth < t && s.pow(depth as u32) < 64 {
            depth += 1;
        }
        let roots = s.pow(depth as u32);
        let partials = exec.map(roots, |r| {
            let mut prefix = Vec::with_capacity(t);
            let mut code = r;
            for _ in 0..depth {
                prefix.push(code % s);
                code /= s;
            }
            prefix.reverse();
            let mut acc = 0.0;
            self.accumulate_prefix(&prefix, center, &mut acc);
            acc
        });

        let mut total: f64 = partials.iter().sum();
        // terms for prefixes shorter than the split depth
        for k in 1..depth {
            let mut prefix = vec![0; k];
            loop {
                total += self.path_terms(&prefix, center);
                if !advance(&mut prefix, s) {
                    break;
                }
            }
        }
        Ok(vec![vec![total]])
    }

    /// Adds the terms of `prefix` and every extension of it.
    fn accumulate_prefix(&self, prefix: &[usize], center: f64, acc: &mut f64) {
        *acc += self.path_terms(prefix, center);
        if prefix.len() == self.horizon() {
            return;
        }
        let mut next = prefix.to_vec();
        next.push(0);
        for s in 0..self.hmm.num_states() {
            *next.last_mut().unwrap() = s;
            self.accumulate_prefix(&next, center, acc);
        }
    }

    /// Prior probability of `x_{1:k}` times the odd term for step `k` plus,
    /// when `k < T`, the even term for step `k`.
    fn path_terms(&self, path: &[usize], center: f64) -> f64 {
        let k = path.len();
        let prob = self.prior_path_probability(path);
        if prob == 0.0 {
            return 0.0;
        }
        let u0 = self.u0() - center;
        let prefix = &path[..k - 1];

        let mut out = 0.0;
        let g_prev = self.log_g_star(prefix).expect("valid path");
        if g_prev.is_finite() {
            let u_k = self.u_centered(path, center);
            let u_prev = self.u_centered(prefix, center);
            out += (u_k * u_k - u_prev * u_prev) * g_prev.exp();
        }
        if k < self.horizon() {
            let g = self.log_g_star(path).expect("valid path");
            if g.is_finite() {
                let g = g.exp();
                let r = self.u_centered(path, center) * g - u0;
                out += r * r / g;
            }
        }
        prob * out
    }

    /// Probability of `x_{1:k}` under the prior chain.
    pub fn prior_path_probability(&self, path: &[usize]) -> f64 {
        let mut p = match path.first() {
            None => return 1.0,
            Some(&x) => self.hmm.initial()[x],
        };
        for w in path.windows(2) {
            p *= self.hmm.transition()[w[0]][w[1]];
        }
        p
    }

    /// Posterior expectation of `u_{k+1}` over one transition from `x_k`.
    pub fn u_one_step_expectation(&self, path: &[usize]) -> Result<f64> {
        self.check_path(path)?;
        if path.len() >= self.horizon() {
            return Err(Error::InvalidArgument("no step left to extend".into()));
        }
        let mut next = path.to_vec();
        next.push(0);
        let mut total = 0.0;
        for s in 0..self.hmm.num_states() {
            let p = match path.last() {
                None => self.hmm.initial()[s],
                Some(&x) => self.hmm.transition()[x][s],
            };
            *next.last_mut().unwrap() = s;
            total += p * self.u_centered(&next, 0.0);
        }
        Ok(total)
    }

    /// `H^i_k / g*_k(x^i_{1:k})` for resampled particle `i` at step `k`.
    pub fn h_over_g_star(
        &self,
        run: &crate::filter::FilterRun<usize>,
        i: usize,
        k: usize,
    ) -> Result<f64> {
        let history = run.history.as_ref().ok_or(Error::MissingHistory)?;
        let indices = crate::filter::ancestor_indices(history, i, k);
        let path: Vec<usize> = indices
            .iter()
            .enumerate()
            .map(|(l, &j)| history[l].weighted.particles[j])
            .collect();
        let log_h = log_h_factor(run, i, k)?;
        Ok((log_h - self.log_g_star(&path)?).exp())
    }
}

fn advance(prefix: &mut [usize], s: usize) -> bool {
    for d in prefix.iter_mut().rev() {
        *d += 1;
        if *d < s {
            return true;
        }
        *d = 0;
    }
    false
}

/// Asymptotic covariance of `sqrt(m) (x_hat_T - E[x_T | z_{1:T}])`.
pub fn exact_sigma(hmm: &DiscreteHmmModel, z: &[usize]) -> Result<Matrix> {
    ExactDiagnostics::new(hmm, z)?.sigma(SigmaTarget::FilterEstimate, Execution::default())
}
