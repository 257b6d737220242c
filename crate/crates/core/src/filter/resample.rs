//! Multinomial resampling by inversion of the weight CDF.

use rand::Rng;
use rand_distr::Exp1;

/// Copy counts `#^i` produced by one resampling pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleRecord {
    pub counts: Vec<u32>,
}

impl ResampleRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Draws `n` i.i.d. indices with probabilities proportional to `weights`.
///
/// Sorted uniforms are produced in O(n) from normalized exponential
/// spacings and matched against the cumulative weights in one sweep, so
/// the returned indices are non-decreasing. Zero-weight entries are never
/// selected.
pub fn multinomial_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    assert!(!weights.is_empty(), "cannot resample an empty cloud");
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let last_positive = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("weights must have positive mass");

    let spacings: Vec<f64> = (0..=n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let spacing_total: f64 = spacings.iter().sum();

    let mut out = Vec::with_capacity(n);
    let mut running = 0.0;
    let mut j = 0;
    for e in &spacings[..n] {
        running += e;
        let u = running / spacing_total * total;
        while j < last_positive && cdf[j] <= u {
            j += 1;
        }
        out.push(j);
    }
    out
}

/// Converts sorted or unsorted indices into per-source copy counts.
pub fn counts_from_indices(indices: &[usize], len: usize) -> ResampleRecord {
    let mut counts = vec![0u32; len];
    for &i in indices {
        counts[i] += 1;
    }
    ResampleRecord { counts }
}
