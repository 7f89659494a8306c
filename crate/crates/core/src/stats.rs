//! Small statistics helpers shared by the estimators.
//!
//! All reductions run in a fixed order so results never depend on how work
//! was scheduled.

use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Number of subsets used for split-sample standard errors.
pub const N_SPLITS: usize = 10;

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n − 1) sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Contiguous, nearly equal partition of `0..n` into `k` ranges.
pub fn split_ranges(n: usize, k: usize) -> Vec<Range<usize>> {
    let k = k.max(1).min(n.max(1));
    (0..k).map(|i| (i * n / k)..((i + 1) * n / k)).collect()
}

/// Standard error of the mean of per-subset estimates.
pub fn split_stderr(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (variance(values) / values.len() as f64).sqrt()
}
