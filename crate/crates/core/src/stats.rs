//! Sample moments, the Jarque-Bera normality test, covariance, histograms.

use crate::error::{Error, Result};

/// Dense row-major square matrix.
pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Population central moments (divisor `n`).
///
/// Skewness is `m3 / m2^(3/2)` and kurtosis `m4 / m2^2` (not excess).
pub fn moments(xs: &[f64]) -> Result<Moments> {
    if xs.len() < 4 {
        return Err(Error::DegenerateSample(format!(
            "need at least 4 observations, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2.is_nan() || m2 <= 0.0 {
        return Err(Error::DegenerateSample("zero variance".into()));
    }
    Ok(Moments {
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityResult {
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jb_stat: f64,
    pub p_value: f64,
    pub reject_at_05: bool,
}

/// Survival function of the chi-square law with two degrees of freedom.
pub fn chi2_2_survival(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (-x / 2.0).exp()
    }
}

/// `JB = n/6 (S^2 + (K - 3)^2 / 4)` from sample skewness and kurtosis.
pub fn jarque_bera_from_moments(n: usize, skewness: f64, kurtosis: f64) -> NormalityResult {
    let excess = kurtosis - 3.0;
    let jb_stat = n as f64 / 6.0 * (skewness * skewness + excess * excess / 4.0);
    let p_value = chi2_2_survival(jb_stat);
    NormalityResult {
        n,
        skewness,
        excess_kurtosis: excess,
        jb_stat,
        p_value,
        reject_at_05: p_value < 0.05,
    }
}

pub fn jarque_bera(xs: &[f64]) -> Result<NormalityResult> {
    let m = moments(xs)?;
    Ok(jarque_bera_from_moments(xs.len(), m.skewness, m.kurtosis))
}

/// Unbiased covariance (divisor `R - 1`) of the rows of an `R x n` sample.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<Matrix> {
    if rows.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "covariance needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("rows differ in length".into()));
    }
    let mean = column_means(rows);
    let mut cov = vec![vec![0.0; n]; n];
    for r in rows {
        for i in 0..n {
            let di = r[i] - mean[i];
            for j in i..n {
                cov[i][j] += di * (r[j] - mean[j]);
            }
        }
    }
    let denom = (rows.len() - 1) as f64;
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}

pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut mean = vec![0.0; n];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]`; the last bin is closed on the right.
/// A constant sample puts all of its mass in the first bin.
pub fn histogram(xs: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0usize; bins];
    if xs.is_empty() {
        return Ok(Histogram {
            edges: vec![0.0; bins + 1],
            counts,
        });
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    for x in xs {
        let idx = if width > 0.0 {
            (((x - lo) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.len() {
        for j in 0..i {
            worst = worst.max((m[i][j] - m[j][i]).abs());
        }
    }
    worst
}

/// Smallest pivot of an LDL^T sweep; non-negative (up to rounding) iff PSD.
pub fn min_pivot(m: &Matrix) -> f64 {
    let n = m.len();
    let mut a = m.clone();
    let mut smallest = f64::INFINITY;
    for k in 0..n {
        let pivot = a[k][k];
        smallest = smallest.min(pivot);
        if pivot.abs() < 1e-300 {
            continue;
        }
        for i in k + 1..n {
            let f = a[i][k] / pivot;
            for j in k + 1..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    smallest
}
