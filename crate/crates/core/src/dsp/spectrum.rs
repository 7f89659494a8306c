//! Averaged periodograms normalized to a shot-noise reference.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::check_compatible;
use crate::error::{Error, Result};
use crate::homodyne::{FrameKind, FrameSet};
use crate::stats::{self, Estimate, N_SPLITS};

/// Noise level relative to shot noise per frequency bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    pub level_db: Vec<f64>,
    pub stderr_db: Vec<f64>,
    /// Level per frame subset and bin; empty for hand-built spectra.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split_level_db: Vec<Vec<f64>>,
}

impl SpectrumEstimate {
    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::new();
        for line in header_comment.lines() {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str("freq_hz,level_db,stderr_db\n");
        for i in 0..self.freqs.len() {
            out.push_str(&format!("{},{},{}\n", self.freqs[i], self.level_db[i], self.stderr_db[i]));
        }
        out
    }
}

/// Sum of one-sided rectangular-window periodograms per split.
fn split_periodogram_sums(fs: &FrameSet) -> Vec<(usize, Vec<f64>)> {
    let n = fs.n_samples;
    let n_bins = n / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    stats::split_ranges(fs.n_frames(), N_SPLITS)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![0.0; n_bins];
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for i in range.clone() {
                for (b, &x) in buf.iter_mut().zip(fs.frame(i)) {
                    *b = Complex::new(x, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            (range.len(), acc)
        })
        .collect()
}

/// Averages per-frame periodograms of `fs`, divides bin-wise by the
/// averaged vacuum periodogram of `reference`, and converts to dB. Standard
/// errors come from repeating the ratio on 10 disjoint frame subsets.
pub fn average_spectrum(fs: &FrameSet, reference: &FrameSet) -> Result<SpectrumEstimate> {
    check_compatible(fs, reference)?;
    if reference.kind != FrameKind::VacuumReference {
        return Err(Error::input("reference frame set must be a vacuum reference"));
    }
    let sig = split_periodogram_sums(fs);
    let vac = split_periodogram_sums(reference);
    let n_bins = fs.n_samples / 2 + 1;
    let total = |parts: &[(usize, Vec<f64>)]| -> Vec<f64> {
        let count: usize = parts.iter().map(|p| p.0).sum();
        (0..n_bins).map(|k| parts.iter().map(|p| p.1[k]).sum::<f64>() / count as f64).collect()
    };
    let sig_mean = total(&sig);
    let vac_mean = total(&vac);
    let level_db: Vec<f64> =
        sig_mean.iter().zip(&vac_mean).map(|(s, v)| 10.0 * (s / v).log10()).collect();
    let n_parts = sig.len().min(vac.len());
    let split_level_db: Vec<Vec<f64>> = (0..n_parts)
        .map(|j| {
            (0..n_bins)
                .map(|k| {
                    let s = sig[j].1[k] / sig[j].0 as f64;
                    let v = vac[j].1[k] / vac[j].0 as f64;
                    10.0 * (s / v).log10()
                })
                .collect()
        })
        .collect();
    let stderr_db = (0..n_bins)
        .map(|k| {
            if n_parts < 2 {
                return 0.0;
            }
            let per: Vec<f64> = split_level_db.iter().map(|row| row[k]).collect();
            stats::split_stderr(&per)
        })
        .collect();
    let split_level_db = if n_parts < 2 { Vec::new() } else { split_level_db };
    let df = 1.0 / (fs.n_samples as f64 * fs.dt);
    Ok(SpectrumEstimate { freqs: (0..n_bins).map(|k| k as f64 * df).collect(), level_db, stderr_db, split_level_db })
}

/// Mean level over bins with f_lo ≤ f ≤ f_hi.
///
/// The error comes from the band means of the frame subsets, which keeps
/// correlations between neighboring bins. Without subsets, per-bin errors
/// are combined in quadrature.
pub fn band_average(spec: &SpectrumEstimate, f_lo: f64, f_hi: f64) -> Result<Estimate> {
    let f_max = spec.freqs.last().copied().unwrap_or(0.0);
    if !(f_lo < f_hi) || f_lo < 0.0 || f_hi > f_max {
        return Err(Error::input(format!(
            "band [{f_lo}, {f_hi}] Hz is outside the spectrum range [0, {f_max}] Hz"
        )));
    }
    let idx: Vec<usize> =
        (0..spec.freqs.len()).filter(|&i| spec.freqs[i] >= f_lo && spec.freqs[i] <= f_hi).collect();
    if idx.is_empty() {
        return Err(Error::input(format!("no frequency bins in [{f_lo}, {f_hi}] Hz")));
    }
    let n = idx.len() as f64;
    let value = idx.iter().map(|&i| spec.level_db[i]).sum::<f64>() / n;
    let stderr = if spec.split_level_db.len() >= 2 {
        let per: Vec<f64> = spec.split_level_db.iter().map(|row| idx.iter().map(|&i| row[i]).sum::<f64>() / n).collect();
        stats::split_stderr(&per)
    } else {
        idx.iter().map(|&i| spec.stderr_db[i].powi(2)).sum::<f64>().sqrt() / n
    };
    Ok(Estimate::new(value, stderr))
}
