use serde::{Deserialize, Serialize};

use super::check_compatible;
use crate::error::{Error, Result};
use crate::homodyne::FrameSet;
use crate::stats::{self, N_SPLITS};

/// Per-sample quadrature variance in shot-noise units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTrace {
    pub dt: f64,
    pub t0: f64,
    pub variance: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl VarianceTrace {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::new();
        for line in header_comment.lines() {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str("time_s,variance,stderr\n");
        for i in 0..self.variance.len() {
            out.push_str(&format!("{},{},{}\n", self.time(i), self.variance[i], self.stderr[i]));
        }
        out
    }
}

/// Unbiased variance across frames for every sample index.
pub(crate) fn column_variances(fs: &FrameSet, frames: std::ops::Range<usize>) -> Vec<f64> {
    let n = fs.n_samples;
    let count = frames.len() as f64;
    let mut mean = vec![0.0; n];
    for i in frames.clone() {
        for (m, x) in mean.iter_mut().zip(fs.frame(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut ss = vec![0.0; n];
    for i in frames {
        for ((s, x), m) in ss.iter_mut().zip(fs.frame(i)).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    ss.into_iter().map(|s| s / (count - 1.0)).collect()
}

/// Pointwise variance of `fs` divided by the time-averaged variance of the
/// vacuum reference (filter transients excluded from the average).
pub fn pointwise_variance(fs: &FrameSet, reference: &FrameSet) -> Result<VarianceTrace> {
    check_compatible(fs, reference)?;
    if fs.n_frames() < 2 || reference.n_frames() < 2 {
        return Err(Error::input("pointwise variance needs at least 2 frames"));
    }
    let n = fs.n_samples;
    let tr = reference.transient_samples.min(n.saturating_sub(1) / 2);
    let vac = column_variances(reference, 0..reference.n_frames());
    let settled = &vac[tr..n - tr];
    let vac_level = settled.iter().sum::<f64>() / settled.len() as f64;
    let variance: Vec<f64> =
        column_variances(fs, 0..fs.n_frames()).into_iter().map(|v| v / vac_level).collect();
    let ranges = stats::split_ranges(fs.n_frames(), N_SPLITS);
    let stderr = if ranges.iter().all(|r| r.len() >= 2) && ranges.len() >= 2 {
        let parts: Vec<Vec<f64>> = ranges.into_iter().map(|r| column_variances(fs, r)).collect();
        (0..n)
            .map(|i| {
                let per: Vec<f64> = parts.iter().map(|p| p[i] / vac_level).collect();
                stats::split_stderr(&per)
            })
            .collect()
    } else {
        vec![f64::NAN; n]
    };
    Ok(VarianceTrace { dt: fs.dt, t0: fs.t0, variance, stderr })
}
