//! Path-weight factors and the evidence-normalized estimator.
//!
//! These work on any model whose run retained its history; only the
//! evidence `E[prod alpha] = p(z_{1:T})` has to be supplied from outside.

use crate::error::{Error, Result};
use crate::filter::{ancestor_indices, FilterRun, StepRecord};
use crate::model::{StateSpaceModel, StateVector};

/// The estimator built with the true evidence, and `prod alpha_bar / evidence`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalEstimate {
    pub x_star: StateVector,
    pub ratio: f64,
}

impl TheoreticalEstimate {
    /// Relative violation of `x_hat * prod(alpha_bar) = evidence * x_star`,
    /// maximized over components.
    pub fn identity_violation(&self, x_hat: &StateVector) -> f64 {
        x_hat
            .iter()
            .zip(self.x_star.iter())
            .map(|(a, b)| {
                let lhs = a * self.ratio;
                let scale = lhs.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (lhs - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

fn history<S>(run: &FilterRun<S>) -> Result<&[StepRecord<S>]> {
    run.history.as_deref().ok_or(Error::MissingHistory)
}

fn path_log_alpha<S>(history: &[StepRecord<S>], i: usize, k: usize) -> f64 {
    ancestor_indices(history, i, k)
        .iter()
        .enumerate()
        .map(|(l, &j)| history[l].weighted.log_alpha[j])
        .sum()
}

/// `log H^i_k = sum_{l<=k} log alpha_bar_l - sum_{l<=k} log alpha_l(x^i_{1:l})`
/// for resampled particle `i` at step `k`.
pub fn log_h_factor<S>(run: &FilterRun<S>, i: usize, k: usize) -> Result<f64> {
    let history = history(run)?;
    if k > history.len() || i >= run.particle_count {
        return Err(Error::InvalidArgument(format!(
            "no resampled particle {i} at step {k}"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let alpha_bars: f64 = run.log_alpha_bars[..k].iter().sum();
    Ok(alpha_bars - path_log_alpha(history, i, k))
}

pub fn h_factor<S>(run: &FilterRun<S>, i: usize, k: usize) -> Result<f64> {
    Ok(log_h_factor(run, i, k)?.exp())
}

/// `x*_T = m^-1 sum_i L_T(x~^i_{1:T}) x~^i_T H^i_{T-1}` from the
/// reconstructed particle paths, given `log E[prod alpha]`.
pub fn theoretical_estimator<M: StateSpaceModel>(
    model: &M,
    run: &FilterRun<M::State>,
    log_evidence: f64,
) -> Result<TheoreticalEstimate> {
    let history = history(run)?;
    let t = history.len();
    let m = run.particle_count;
    let last = &history[t - 1].weighted;
    let dim = model.state_dim();
    let mut buf = vec![0.0; dim];
    let mut x_star = StateVector::zeros(dim);
    for i in 0..m {
        // predicted particle i at T descends from resampled particle i at T-1
        let prefix = if t > 1 { path_log_alpha(&history[..t - 1], i, t - 1) } else { 0.0 };
        let likelihood_ratio = (prefix + last.log_alpha[i] - log_evidence).exp();
        let h = log_h_factor(run, i, t - 1)?.exp();
        let weight = likelihood_ratio * h;
        if weight == 0.0 {
            continue;
        }
        model.write_state(&last.particles[i], &mut buf);
        for (o, b) in x_star.iter_mut().zip(&buf) {
            *o += weight * b;
        }
    }
    x_star.iter_mut().for_each(|x| *x /= m as f64);
    let ratio = (run.log_alpha_bar_product() - log_evidence).exp();
    Ok(TheoreticalEstimate { x_star, ratio })
}
