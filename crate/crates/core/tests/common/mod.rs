//! Shared test oracles. Everything here is computed by direct enumeration
//! or plain recursions written independently of the library's code paths.

#![allow(dead_code)]

use pfclt::DiscreteHmmModel;
use rand::Rng;

pub fn random_row<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // absorb rounding so the row sums to 1 within the model's tolerance
    let tail: f64 = row[..len - 1].iter().sum();
    row[len - 1] = 1.0 - tail;
    row
}

pub fn random_hmm<R: Rng>(rng: &mut R, states: usize, symbols: usize) -> DiscreteHmmModel {
    let values = (0..states).map(|_| rng.random_range(-2.0..3.0)).collect();
    DiscreteHmmModel::new(
        values,
        random_row(rng, states),
        (0..states).map(|_| random_row(rng, states)).collect(),
        (0..states).map(|_| random_row(rng, symbols)).collect(),
    )
    .unwrap()
}

/// All label sequences of length `len` over `0..states`.
pub fn all_paths(states: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..states).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn prior_prob(hmm: &DiscreteHmmModel, path: &[usize]) -> f64 {
    let mut p = hmm.initial()[path[0]];
    for w in path.windows(2) {
        p *= hmm.transition()[w[0]][w[1]];
    }
    p
}

pub fn likelihood(hmm: &DiscreteHmmModel, path: &[usize], z: &[usize]) -> f64 {
    path.iter()
        .zip(z)
        .map(|(&x, &s)| hmm.emission()[x][s])
        .product()
}

/// `p(z_{1:k})` by summing over every latent path of length `k`.
pub fn brute_evidence(hmm: &DiscreteHmmModel, z: &[usize]) -> f64 {
    all_paths(hmm.num_states(), z.len())
        .iter()
        .map(|p| prior_prob(hmm, p) * likelihood(hmm, p, z))
        .sum()
}

/// Filtering posterior at the last step by enumeration.
pub fn brute_posterior(hmm: &DiscreteHmmModel, z: &[usize]) -> Vec<f64> {
    let mut post = vec![0.0; hmm.num_states()];
    for p in all_paths(hmm.num_states(), z.len()) {
        post[*p.last().unwrap()] += prior_prob(hmm, &p) * likelihood(hmm, &p, z);
    }
    let total: f64 = post.iter().sum();
    post.iter().map(|v| v / total).collect()
}

/// `u_k(x_{1:k}) = E[x_T L_T | x_{1:k}]` by enumerating every continuation.
pub fn brute_u(hmm: &DiscreteHmmModel, z: &[usize], prefix: &[usize]) -> f64 {
    let t = z.len();
    let evidence = brute_evidence(hmm, z);
    if prefix.is_empty() {
        let post = brute_posterior(hmm, z);
        return post.iter().zip(hmm.values()).map(|(p, v)| p * v).sum();
    }
    let mut total = 0.0;
    for cont in all_paths(hmm.num_states(), t - prefix.len()) {
        let mut prob = 1.0;
        let mut prev = *prefix.last().unwrap();
        for &s in &cont {
            prob *= hmm.transition()[prev][s];
            prev = s;
        }
        let full: Vec<usize> = prefix.iter().chain(&cont).copied().collect();
        let x_t = hmm.values()[*full.last().unwrap()];
        total += prob * x_t * likelihood(hmm, &full, z) / evidence;
    }
    total
}

/// Asymptotic covariance by forward/backward recursions, with test
/// function `x_T - center`. Uses the reductions
/// `E[u_k^2 g*_k] = Z_k / Z^2 sum_s F_k(s) d_k(s)^2` and
/// `E[u_k^2 g*_{k-1}] = Z_{k-1} / Z^2 sum_s Pred_k(s) B(s, z_k)^2 d_k(s)^2`,
/// where `F_k` is the unnormalized forward message, `Pred_k` its
/// prediction, and `d_k(s) = E[(x_T - center) prod_{l>k} B | x_k = s]`.
pub fn recursion_sigma(hmm: &DiscreteHmmModel, z: &[usize], center: f64) -> f64 {
    let s = hmm.num_states();
    let t = z.len();
    let b = |x: usize, k: usize| hmm.emission()[x][z[k]];

    let mut pred = vec![hmm.initial().to_vec()];
    let mut fwd: Vec<Vec<f64>> = Vec::new();
    for k in 0..t {
        let f: Vec<f64> = (0..s).map(|x| pred[k][x] * b(x, k)).collect();
        if k + 1 < t {
            pred.push(
                (0..s)
                    .map(|j| (0..s).map(|i| f[i] * hmm.transition()[i][j]).sum())
                    .collect(),
            );
        }
        fwd.push(f);
    }
    let zk: Vec<f64> = fwd.iter().map(|f| f.iter().sum()).collect();
    let evidence = zk[t - 1];

    let mut d = vec![vec![0.0; s]; t];
    d[t - 1] = hmm.values().iter().map(|v| v - center).collect();
    for k in (0..t - 1).rev() {
        for i in 0..s {
            d[k][i] = (0..s)
                .map(|j| hmm.transition()[i][j] * b(j, k + 1) * d[k + 1][j])
                .sum();
        }
    }
    let u0 = fwd[t - 1]
        .iter()
        .zip(hmm.values())
        .map(|(f, v)| f * (v - center))
        .sum::<f64>()
        / evidence;

    let z_prev = |k: usize| if k == 0 { 1.0 } else { zk[k - 1] };
    let mut sigma = 0.0;
    for k in 0..t {
        let e_uk_gprev: f64 = (0..s)
            .map(|x| pred[k][x] * b(x, k).powi(2) * d[k][x].powi(2))
            .sum::<f64>()
            * z_prev(k)
            / evidence.powi(2);
        let e_uprev_gprev = if k == 0 {
            u0 * u0
        } else {
            (0..s).map(|x| fwd[k - 1][x] * d[k - 1][x].powi(2)).sum::<f64>() * zk[k - 1]
                / evidence.powi(2)
        };
        sigma += e_uk_gprev - e_uprev_gprev;
        if k + 1 < t {
            let e_uk_gk: f64 = (0..s).map(|x| fwd[k][x] * d[k][x].powi(2)).sum::<f64>() * zk[k]
                / evidence.powi(2);
            sigma += e_uk_gk - u0 * u0;
        }
    }
    sigma
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
