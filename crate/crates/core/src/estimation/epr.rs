//! Two-mode inseparability from frequency-bin modes g₁, g₂ of a
//! time-alternated squeezing program.

use serde::{Deserialize, Serialize};

use crate::dsp::modes::{
    make_mode, quadratures, reference_autocovariance, vacuum_scale_from_autocovariance, ModeFamily,
    ModeParams, TemporalMode, VACUUM_MAX_LAG,
};
use crate::error::{Error, Result};
use crate::homodyne::{DetectorModel, FrameSet, WARMUP_SAMPLES};
use crate::opa::SqueezerTrajectory;
use crate::quantum::{duan_value, effective_squeezing_db, DuanResult};
use std::f64::consts::FRAC_PI_2;

/// Range of mode centers to scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EprSearch {
    /// γ, t_w and T of the g₁/g₂ modes; `t_c` is ignored.
    pub mode: ModeParams,
    pub t_c_min: f64,
    pub t_c_max: f64,
    pub step: f64,
}

impl EprSearch {
    pub fn candidates(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.t_c_max >= self.t_c_min) {
            return Err(Error::input("t_c scan needs step > 0 and t_c_max >= t_c_min"));
        }
        let n = ((self.t_c_max - self.t_c_min) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.t_c_min + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EprScanPoint {
    pub t_c: f64,
    pub duan: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprReport {
    pub duan: f64,
    pub stderr: f64,
    pub var_x_diff: f64,
    pub var_p_sum: f64,
    pub effective_db: f64,
    /// Mode center minimizing the Duan value.
    pub t_c: f64,
    pub entangled: bool,
    /// (4 − duan) / stderr.
    pub margin_sigma: f64,
    pub n_frames: usize,
    pub mode: ModeParams,
    pub scan: Vec<EprScanPoint>,
    pub warnings: Vec<String>,
}

impl EprReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn epr_modes(params: ModeParams, dt: f64) -> Result<(TemporalMode, TemporalMode)> {
    Ok((make_mode(ModeFamily::G1, params, dt)?, make_mode(ModeFamily::G2, params, dt)?))
}

/// (x₁, x₂) from the φ = 0 frames and (p₁, p₂) from the φ = π/2 frames, in
/// shot-noise units.
fn duan_at(fs_x: &FrameSet, fs_p: &FrameSet, acov: &[f64], params: ModeParams) -> Result<(DuanResult, Vec<String>)> {
    let (g1, g2) = epr_modes(params, fs_x.dt)?;
    let s1 = vacuum_scale_from_autocovariance(acov, &g1);
    let s2 = vacuum_scale_from_autocovariance(acov, &g2);
    let x1 = quadratures(fs_x, &g1, s1)?;
    let x2 = quadratures(fs_x, &g2, s2)?;
    let p1 = quadratures(fs_p, &g1, s1)?;
    let p2 = quadratures(fs_p, &g2, s2)?;
    Ok((duan_value(&x1, &p1, &x2, &p2)?, g1.warnings))
}

/// Extracts g₁/g₂ quadratures at every candidate center, evaluates
/// Var(x₁ − x₂) + Var(p₁ + p₂) and reports the minimizing center.
pub fn run_epr_analysis(
    fs_x: &FrameSet,
    fs_p: &FrameSet,
    reference: &FrameSet,
    search: &EprSearch,
) -> Result<EprReport> {
    crate::dsp::check_compatible(fs_x, reference)?;
    crate::dsp::check_compatible(fs_p, reference)?;
    let tol = 1e-9;
    if fs_x.phase_tags.iter().any(|p| p.rem_euclid(2.0 * std::f64::consts::PI).abs() > tol)
        || fs_p.phase_tags.iter().any(|p| (p - FRAC_PI_2).abs() > tol)
    {
        return Err(Error::input("EPR analysis needs x frames at phase 0 and p frames at phase pi/2"));
    }
    let candidates = search.candidates()?;
    let record = fs_x.n_samples as f64 * fs_x.dt;
    for &t in [candidates[0], candidates[candidates.len() - 1]].iter() {
        if t - search.mode.t_w / 2.0 < 0.0 || t + search.mode.t_w / 2.0 > record - fs_x.dt {
            return Err(Error::input(format!(
                "mode centered at {t} s with width {} s leaves the {record} s record",
                search.mode.t_w
            )));
        }
    }
    let acov = reference_autocovariance(reference, VACUUM_MAX_LAG)?;
    let mut scan = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, DuanResult, Vec<String>)> = None;
    for t_c in candidates {
        let (d, warn) = duan_at(fs_x, fs_p, &acov, ModeParams { t_c, ..search.mode })?;
        scan.push(EprScanPoint { t_c, duan: d.value, stderr: d.stderr });
        if best.as_ref().is_none_or(|b| d.value < b.1.value) {
            best = Some((t_c, d, warn));
        }
    }
    let (t_c, d, warnings) = best.expect("at least one candidate");
    Ok(EprReport {
        duan: d.value,
        stderr: d.stderr,
        var_x_diff: d.var_x_diff,
        var_p_sum: d.var_p_sum,
        effective_db: effective_squeezing_db(d.value)?,
        t_c,
        entangled: d.entangled,
        margin_sigma: (4.0 - d.value) / d.stderr,
        n_frames: fs_x.n_frames(),
        mode: ModeParams { t_c, ..search.mode },
        scan,
        warnings,
    })
}

/// Length of the detector impulse response kept by [`duan_oracle`].
const ORACLE_RESPONSE_LEN: usize = 512;

/// Expected Duan value for frames simulated from `traj` through `det`.
///
/// Each recorded sample is y = (h ∗ ξ) + e with independent ξ_k of
/// variance V(t_k) and white electronic noise e, so a mode integral with
/// weights v has variance Σ_k V_k (Σ_i v_i h_{i−k})² + σ_e² Σ v_i². Modes are
/// normalized by the same expression with V ≡ 1. Without a detector filter
/// this reduces to 2∫f₁²V_x dt + 2∫f₂²V_p dt.
pub fn duan_oracle(traj: &SqueezerTrajectory, det: &DetectorModel, params: ModeParams) -> Result<f64> {
    det.validate()?;
    traj.validate()?;
    let traj = traj.resampled(det.dt());
    let (g1, g2) = epr_modes(params, det.dt())?;
    if g1.end() > traj.len() {
        return Err(Error::input("mode support extends past the trajectory"));
    }
    let h = det.impulse_response(ORACLE_RESPONSE_LEN);
    let e2 = det.electronic_noise_variance();
    let vx = traj.variance_trace(0.0);
    let vp = traj.variance_trace(FRAC_PI_2);
    let first = g1.start as isize - h.len() as isize + 1;
    let first = first.max(-(WARMUP_SAMPLES as isize));
    // u_k = Σ_i v_i h_{i−k}
    let smear = |v: &[f64], start: usize| -> Vec<(isize, f64)> {
        (first..(start + v.len()) as isize)
            .map(|k| {
                let s: f64 = v
                    .iter()
                    .enumerate()
                    .filter_map(|(j, w)| {
                        let lag = (start + j) as isize - k;
                        (0..h.len() as isize).contains(&lag).then(|| w * h[lag as usize])
                    })
                    .sum();
                (k, s)
            })
            .collect()
    };
    let variance = |v: &[f64], var: &[f64]| -> f64 {
        let white: f64 = v.iter().map(|w| w * w).sum::<f64>() * e2;
        smear(v, g1.start).iter().map(|&(k, u)| var[k.max(0) as usize] * u * u).sum::<f64>() + white
    };
    let ones = vec![1.0; traj.len()];
    let s1 = variance(&g1.weights, &ones).sqrt();
    let s2 = variance(&g2.weights, &ones).sqrt();
    let diff: Vec<f64> = g1.weights.iter().zip(&g2.weights).map(|(a, b)| a / s1 - b / s2).collect();
    let sum: Vec<f64> = g1.weights.iter().zip(&g2.weights).map(|(a, b)| a / s1 + b / s2).collect();
    Ok(variance(&diff, &vx) + variance(&sum, &vp))
}
