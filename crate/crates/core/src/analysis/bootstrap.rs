//! Percentile bootstrap for sample means.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{compensated_sum, KahanSum};

pub const DEFAULT_RESAMPLES: usize = 1000;

/// Sample mean with bootstrap standard error and 95% percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    /// |mean − target| / se; zero-variance estimates score 0 only on the
    /// target itself.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }

    /// `mean ≥ bound − k·se`.
    pub fn at_least(&self, bound: f64, k: f64) -> bool {
        self.mean >= bound - k * self.se
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    let f = pos - i as f64;
    sorted[i] * (1.0 - f) + sorted[j] * f
}

/// Bootstrap of the mean of `values`; deterministic given `rng`.
pub fn bootstrap_mean<R: Rng + ?Sized>(values: &[f64], resamples: usize, rng: &mut R) -> Estimate {
    let n = values.len();
    let m = if n == 0 { f64::NAN } else { mean(values) };
    if n == 0 || resamples == 0 {
        return Estimate { n, mean: m, se: f64::NAN, ci_lo: f64::NAN, ci_hi: f64::NAN };
    }
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = KahanSum::default();
        for _ in 0..n {
            acc.add(values[rng.random_range(0..n)]);
        }
        means.push(acc.value() / n as f64);
    }
    let bm = mean(&means);
    let var = compensated_sum(means.iter().map(|x| (x - bm) * (x - bm))) / (resamples.max(2) - 1) as f64;
    means.sort_by(f64::total_cmp);
    Estimate {
        n,
        mean: m,
        se: var.sqrt(),
        ci_lo: quantile(&means, 0.025),
        ci_hi: quantile(&means, 0.975),
    }
}

/// One row of a running-mean convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningRow {
    pub n: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub se: f64,
}

/// Prefix sizes 10 per decade (all integers below 10), always including 10^k
/// and `n`.
pub fn log_spaced_counts(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut j = 0u32;
    loop {
        let k = 10f64.powf(j as f64 / 10.0).round() as usize;
        if k > n {
            break;
        }
        if out.last() != Some(&k) {
            out.push(k);
        }
        j += 1;
    }
    if out.last() != Some(&n) && n > 0 {
        out.push(n);
    }
    out
}

/// Running mean of the first n values with a bootstrap interval at each
/// log-spaced n.
pub fn running_rows<R: Rng + ?Sized>(values: &[f64], resamples: usize, rng: &mut R) -> Vec<RunningRow> {
    log_spaced_counts(values.len())
        .into_iter()
        .map(|k| {
            let e = bootstrap_mean(&values[..k], resamples, rng);
            RunningRow { n: k, mean: e.mean, ci_lo: e.ci_lo, ci_hi: e.ci_hi, se: e.se }
        })
        .collect()
}

/// Mean after each successive value.
pub fn running_means(values: &[f64]) -> Vec<f64> {
    let mut acc = KahanSum::default();
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            acc.add(x);
            acc.value() / (i + 1) as f64
        })
        .collect()
}
