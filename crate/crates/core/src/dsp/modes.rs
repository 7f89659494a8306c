//! Temporal (wave-packet) modes and single-mode quadrature extraction.
//!
//! Mode families:
//! - `TfMode`: t·e^(−γ²t²) on |t| ≤ t_w/2, insensitive to low-frequency noise.
//! - `F1`/`F2`: Gaussian envelope gated by the square wave h(t; 1, 0) or
//!   h(t; 0, 1) of period T, so they have disjoint supports.
//! - `G1`/`G2`: balanced beam-splitter combinations, g₁ = (f₁ + f₂)/√2 and
//!   g₂ = (−f₁ + f₂)/√2. g₁ is a plain Gaussian around 0 Hz; g₂ oscillates
//!   at 1/T.
//!
//! All g/f family members share one normalization constant C, computed
//! numerically on the sampled grid so the beam-splitter identities hold
//! exactly. When the center sits halfway between samples the square-wave
//! gates split the envelope symmetrically and f₁, f₂ are each normalized.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::homodyne::FrameSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeFamily {
    TfMode,
    F1,
    F2,
    G1,
    G2,
    /// User-supplied weights.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// s⁻¹.
    pub gamma: f64,
    /// Window width, seconds.
    pub t_w: f64,
    /// Square-wave period T for the f/g families, seconds.
    #[serde(default)]
    pub period: Option<f64>,
    /// Center, seconds from the first sample of the record.
    pub t_c: f64,
}

impl ModeParams {
    /// γ = 2.5e8 s⁻¹, t_w = 30 ns.
    pub fn tomography(t_c: f64) -> Self {
        Self { gamma: 2.5e8, t_w: 30e-9, period: None, t_c }
    }

    /// γ = 5e6 s⁻¹, T = 100 ns, t_w = 1000 ns.
    pub fn epr(t_c: f64) -> Self {
        Self { gamma: 5e6, t_w: 1000e-9, period: Some(100e-9), t_c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMode {
    pub dt: f64,
    /// Record index of the first weight.
    pub start: usize,
    pub weights: Vec<f64>,
    pub family: ModeFamily,
    pub params: ModeParams,
    /// Normalization constant applied to the family's shape function.
    pub scale: f64,
    pub warnings: Vec<String>,
}

/// γT/π above which the f/g modes stop being well separated in frequency.
pub const SEPARATION_WARN: f64 = 0.1;

/// h(t; a, b): a on [nT, (n+½)T), b on [(n+½)T, (n+1)T).
pub fn square_wave(t: f64, period: f64, a: f64, b: f64) -> f64 {
    let u = t / period;
    if u - u.floor() < 0.5 {
        a
    } else {
        b
    }
}

fn shape(family: ModeFamily, params: &ModeParams, t: f64) -> f64 {
    let env = (-(params.gamma * t).powi(2)).exp();
    let period = params.period.unwrap_or(f64::INFINITY);
    match family {
        ModeFamily::TfMode => t * env,
        ModeFamily::G1 => env / SQRT_2,
        ModeFamily::G2 => env * square_wave(t, period, -1.0, 1.0) / SQRT_2,
        ModeFamily::F1 => env * square_wave(t, period, 1.0, 0.0),
        ModeFamily::F2 => env * square_wave(t, period, 0.0, 1.0),
        ModeFamily::Custom => 0.0,
    }
}

/// Samples a mode on the record grid t_i = i·dt, restricted to
/// |t_i − t_c| ≤ t_w/2, and normalizes it.
pub fn make_mode(family: ModeFamily, params: ModeParams, dt: f64) -> Result<TemporalMode> {
    if family == ModeFamily::Custom {
        return Err(Error::input("custom modes are built with TemporalMode::from_weights"));
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::input(format!("gamma must be positive, got {}", params.gamma)));
    }
    if !(params.t_w > 0.0 && params.t_w.is_finite()) {
        return Err(Error::input(format!("t_w must be positive, got {}", params.t_w)));
    }
    if !(dt > 0.0) {
        return Err(Error::input("dt must be positive"));
    }
    let mut warnings = Vec::new();
    if family != ModeFamily::TfMode {
        let period = params
            .period
            .filter(|t| *t > 0.0)
            .ok_or_else(|| Error::input("f/g modes need a positive square-wave period"))?;
        let ratio = params.gamma * period / std::f64::consts::PI;
        if ratio >= SEPARATION_WARN {
            warnings.push(format!("gamma*T/pi = {ratio:.3} is not << 1; frequency bins overlap"));
        }
    }
    // Center in sample units, snapped to the half-sample grid when the
    // offset is only unit-conversion rounding.
    let c = params.t_c / dt;
    let c = if ((2.0 * c).round() - 2.0 * c).abs() < 1e-6 { (2.0 * c).round() / 2.0 } else { c };
    let half = params.t_w / (2.0 * dt);
    let lo = (c - half - 1e-9).ceil();
    let hi = (c + half + 1e-9).floor();
    if lo < 0.0 {
        return Err(Error::input(format!(
            "mode support starts before the record (t_c = {} s)",
            params.t_c
        )));
    }
    if hi < lo {
        return Err(Error::input("mode window contains no samples"));
    }
    let (start, end) = (lo as usize, hi as usize);
    let times: Vec<f64> = (start..=end).map(|i| (i as f64 - c) * dt).collect();
    // g₁ carries the envelope/√2; its normalization fixes C for the family.
    let norm_family = if family == ModeFamily::TfMode { ModeFamily::TfMode } else { ModeFamily::G1 };
    let energy: f64 = times.iter().map(|&t| shape(norm_family, &params, t).powi(2)).sum::<f64>() * dt;
    if !(energy > 0.0) {
        return Err(Error::input("mode has zero energy on the sampled grid"));
    }
    let scale = 1.0 / energy.sqrt();
    let weights = times.iter().map(|&t| scale * shape(family, &params, t)).collect();
    Ok(TemporalMode { dt, start, weights, family, params, scale, warnings })
}

impl TemporalMode {
    /// Escape hatch for arbitrary mode shapes; weights are normalized.
    pub fn from_weights(dt: f64, start: usize, weights: Vec<f64>) -> Result<Self> {
        let energy: f64 = weights.iter().map(|w| w * w).sum::<f64>() * dt;
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::input("custom mode has no energy"));
        }
        let scale = 1.0 / energy.sqrt();
        let t_w = weights.len() as f64 * dt;
        Ok(Self {
            dt,
            start,
            weights: weights.into_iter().map(|w| w * scale).collect(),
            family: ModeFamily::Custom,
            params: ModeParams { gamma: f64::NAN, t_w, period: None, t_c: (start as f64) * dt + t_w / 2.0 },
            scale,
            warnings: Vec::new(),
        })
    }

    pub fn end(&self) -> usize {
        self.start + self.weights.len()
    }

    /// Σ w²·dt.
    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>() * self.dt
    }

    /// Σ w_a·w_b·dt over the common support.
    pub fn inner(&self, other: &TemporalMode) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        (lo..hi.max(lo))
            .map(|i| self.weights[i - self.start] * other.weights[i - other.start])
            .sum::<f64>()
            * self.dt
    }

    /// The normalized continuous mode function at record time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let u = t - self.params.t_c;
        if self.family == ModeFamily::Custom || u.abs() > self.params.t_w / 2.0 {
            return 0.0;
        }
        self.scale * shape(self.family, &self.params, u)
    }

    /// Normalized linear combination Σ cₖ·modeₖ over a shared grid.
    pub fn combine(parts: &[(f64, &TemporalMode)]) -> Result<TemporalMode> {
        let first = parts.first().ok_or_else(|| Error::input("no modes to combine"))?.1;
        let start = parts.iter().map(|p| p.1.start).min().unwrap();
        let end = parts.iter().map(|p| p.1.end()).max().unwrap();
        let mut w = vec![0.0; end - start];
        for (c, m) in parts {
            for (k, x) in m.weights.iter().enumerate() {
                w[m.start - start + k] += c * x;
            }
        }
        TemporalMode::from_weights(first.dt, start, w)
    }
}

/// q = Σ w(i)·x(i)·dt / ref_scale, where `ref_scale` is the vacuum
/// standard deviation of the unscaled sum (see [`vacuum_scale`]).
pub fn extract_quadrature(frame: &[f64], mode: &TemporalMode, ref_scale: f64) -> Result<f64> {
    if mode.end() > frame.len() {
        return Err(Error::input(format!(
            "mode support [{}, {}) overflows the {}-sample frame",
            mode.start,
            mode.end(),
            frame.len()
        )));
    }
    if !(ref_scale > 0.0) {
        return Err(Error::input("reference scale must be positive"));
    }
    let s: f64 = mode.weights.iter().zip(&frame[mode.start..]).map(|(w, x)| w * x).sum();
    Ok(s * mode.dt / ref_scale)
}

/// Quadratures of every frame, unnormalized unless `ref_scale` is given.
pub fn quadratures(fs: &FrameSet, mode: &TemporalMode, ref_scale: f64) -> Result<Vec<f64>> {
    fs.frames().map(|f| extract_quadrature(f, mode, ref_scale)).collect()
}

/// Lags of the vacuum autocovariance used for mode normalization. The
/// detector response must decorrelate well within this many samples.
pub const VACUUM_MAX_LAG: usize = 64;

/// Autocovariance R(ℓ), ℓ = 0..=max_lag, of a stationary reference,
/// averaged over frames and over the settled part of each frame.
pub fn reference_autocovariance(reference: &FrameSet, max_lag: usize) -> Result<Vec<f64>> {
    reference.validate()?;
    let n = reference.n_samples;
    let tr = reference.transient_samples;
    if reference.n_frames() < 2 || n < 2 * tr + max_lag + 1 {
        return Err(Error::input("vacuum reference is too short for the autocovariance"));
    }
    let (lo, hi) = (tr, n - tr);
    let total: f64 = reference.frames().map(|f| f[lo..hi].iter().sum::<f64>()).sum();
    let mean = total / (reference.n_frames() * (hi - lo)) as f64;
    let sums: Vec<Vec<f64>> = reference
        .data
        .par_chunks(n)
        .map(|f| {
            (0..=max_lag)
                .map(|l| (lo..hi - l).map(|i| (f[i] - mean) * (f[i + l] - mean)).sum())
                .collect()
        })
        .collect();
    Ok((0..=max_lag)
        .map(|l| sums.iter().map(|s| s[l]).sum::<f64>() / (reference.n_frames() * (hi - lo - l)) as f64)
        .collect())
}

/// Vacuum standard deviation of the raw mode integral Σ w·x·dt, computed
/// from a (Toeplitz) autocovariance.
pub fn vacuum_scale_from_autocovariance(acov: &[f64], mode: &TemporalMode) -> f64 {
    let w = &mode.weights;
    let var: f64 = acov
        .iter()
        .enumerate()
        .take(w.len())
        .map(|(l, r)| {
            let overlap: f64 = w.iter().zip(&w[l..]).map(|(a, b)| a * b).sum();
            if l == 0 {
                r * overlap
            } else {
                2.0 * r * overlap
            }
        })
        .sum();
    var.sqrt() * mode.dt
}

/// Vacuum standard deviation of the raw mode integral, so that dividing by
/// it puts quadratures in shot-noise units.
pub fn vacuum_scale(reference: &FrameSet, mode: &TemporalMode) -> Result<f64> {
    let acov = reference_autocovariance(reference, VACUUM_MAX_LAG)?;
    Ok(vacuum_scale_from_autocovariance(&acov, mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    /// Center of the dominant spectral lobe, Hz (0 for a baseband lobe).
    pub center_freq: f64,
    /// Half width at half maximum of |mode(f)|, Hz.
    pub hwhm: f64,
    pub f_cut: f64,
    /// Energy fraction on the far side of `f_cut` from the dominant lobe.
    pub out_of_band_fraction: f64,
    /// Σ |mode(f)|²·df over the full two-sided spectrum.
    pub spectral_energy: f64,
}

/// Zero-padded DFT analysis of a mode's spectrum.
///
/// HWHM is measured on the amplitude spectrum |mode(f)|, the quantity the
/// ≈1.3 MHz figure for γ = 5e6 s⁻¹ refers to (γ√(ln 2)/π).
pub fn mode_spectrum(mode: &TemporalMode, f_cut: f64) -> ModeSpectrum {
    let n = (mode.weights.len() * 16).max(1 << 18).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
    for (b, &w) in buf.iter_mut().zip(&mode.weights) {
        *b = Complex::new(w * mode.dt, 0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * mode.dt);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let spectral_energy = power.iter().sum::<f64>() * df;
    let half = n / 2;
    let amp: Vec<f64> = power[..=half].iter().map(|p| p.sqrt()).collect();
    let k_peak = (0..=half).max_by(|&a, &b| amp[a].total_cmp(&amp[b])).unwrap_or(0);
    let hm = amp[k_peak] / 2.0;
    let cross = |a: usize, b: usize| -> f64 {
        // linear interpolation of the half-max crossing between bins a and b
        let t = (amp[a] - hm) / (amp[a] - amp[b]);
        (a as f64 + t * (b as f64 - a as f64)) * df
    };
    let mut r = k_peak;
    while r < half && amp[r + 1] >= hm {
        r += 1;
    }
    let f_hi = if r < half { cross(r, r + 1) } else { half as f64 * df };
    let mut l = k_peak;
    while l > 0 && amp[l - 1] >= hm {
        l -= 1;
    }
    let (center_freq, hwhm) = if l == 0 {
        (0.0, f_hi)
    } else {
        let f_lo = cross(l, l - 1);
        let (num, den) = (l..=r).fold((0.0, 0.0), |(num, den), k| {
            (num + k as f64 * df * power[k], den + power[k])
        });
        (num / den, (f_hi - f_lo) / 2.0)
    };
    let lowpass = center_freq < f_cut;
    let wrong: f64 = (0..n)
        .filter(|&k| {
            let f = if k <= half { k as f64 } else { (n - k) as f64 } * df;
            if lowpass {
                f > f_cut
            } else {
                f < f_cut
            }
        })
        .map(|k| power[k])
        .sum::<f64>()
        * df;
    ModeSpectrum { center_freq, hwhm, f_cut, out_of_band_fraction: wrong / spectral_energy, spectral_energy }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1e-9;

    fn epr_modes(t_c: f64) -> Vec<TemporalMode> {
        [ModeFamily::F1, ModeFamily::F2, ModeFamily::G1, ModeFamily::G2]
            .iter()
            .map(|&f| make_mode(f, ModeParams::epr(t_c), DT).unwrap())
            .collect()
    }

    #[test]
    fn tf_mode_is_odd_and_normalized() {
        let m = make_mode(ModeFamily::TfMode, ModeParams::tomography(100e-9), DT).unwrap();
        assert_eq!(m.weights.len(), 31);
        assert!((m.norm() - 1.0).abs() < 1e-12);
        let n = m.weights.len();
        let peak = m.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        for k in 0..n {
            assert!((m.weights[k] + m.weights[n - 1 - k]).abs() < 1e-12 * peak);
        }
        assert_eq!(m.weights[15], 0.0);
        assert_eq!(m.eval(100e-9), 0.0);
        assert!(m.eval(103e-9) > 0.0 && m.eval(97e-9) < 0.0);
    }

    #[test]
    fn epr_family_identities() {
        let ms = epr_modes(599.5e-9);
        let (f1, f2, g1, g2) = (&ms[0], &ms[1], &ms[2], &ms[3]);
        for m in &ms {
            assert!((m.norm() - 1.0).abs() < 1e-12, "{:?} {}", m.family, m.norm());
            // γT/π = 0.16 for these parameters
            assert_eq!(m.warnings.len(), 1);
        }
        assert_eq!(f1.inner(f2), 0.0);
        for k in 0..f1.weights.len() {
            assert!(f1.weights[k] * f2.weights[k] == 0.0);
            assert!((g1.weights[k] - (f1.weights[k] + f2.weights[k]) / SQRT_2).abs() < 1e-12);
            assert!((g2.weights[k] - (f2.weights[k] - f1.weights[k]) / SQRT_2).abs() < 1e-12);
        }
        assert!(g1.inner(g2).abs() < 1e-12);
    }

    #[test]
    fn parseval() {
        for m in epr_modes(599.5e-9) {
            let s = mode_spectrum(&m, 5e6);
            assert!((s.spectral_energy - m.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_params() {
        let mut p = ModeParams::tomography(100e-9);
        p.gamma = 0.0;
        assert!(make_mode(ModeFamily::TfMode, p, DT).is_err());
        let mut p = ModeParams::tomography(100e-9);
        p.t_w = -1.0;
        assert!(make_mode(ModeFamily::TfMode, p, DT).is_err());
        assert!(make_mode(ModeFamily::TfMode, ModeParams::tomography(5e-9), DT).is_err());
        let mut p = ModeParams::epr(600e-9);
        p.period = None;
        assert!(make_mode(ModeFamily::G2, p, DT).is_err());
        let mut narrow = ModeParams::epr(600e-9);
        narrow.gamma = 2e6;
        assert!(make_mode(ModeFamily::G2, narrow, DT).unwrap().warnings.is_empty());
    }

    #[test]
    fn extraction_support_overflow() {
        let m = make_mode(ModeFamily::TfMode, ModeParams::tomography(100e-9), DT).unwrap();
        assert!(extract_quadrature(&[0.0; 110], &m, 1.0).is_err());
        assert_eq!(extract_quadrature(&[0.0; 200], &m, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn vacuum_quadratures_have_unit_variance() {
        use crate::homodyne::{simulate_vacuum_reference, DetectorModel};
        let det = DetectorModel::default();
        let reference = simulate_vacuum_reference(&det, 200, 4000, 21).unwrap();
        let probe = simulate_vacuum_reference(&det, 200, 4000, 22).unwrap();
        let m = make_mode(ModeFamily::TfMode, ModeParams::tomography(100e-9), DT).unwrap();
        let scale = vacuum_scale(&reference, &m).unwrap();
        let q = quadratures(&probe, &m, scale).unwrap();
        let v = crate::stats::variance(&q);
        // SE of a variance from 4000 Gaussian samples is √(2/4000) ≈ 0.022
        assert!((v - 1.0).abs() < 0.07, "{v}");
        // the autocovariance reproduces the analytic filter correlations
        let acov = reference_autocovariance(&reference, 8).unwrap();
        let h = det.impulse_response(400);
        for (l, r) in acov.iter().enumerate() {
            let exact: f64 = h.iter().zip(&h[l..]).map(|(a, b)| a * b).sum();
            assert!((r - exact).abs() < 0.01, "lag {l}: {r} vs {exact}");
        }
    }
}
