//! Linear-phase windowed-sinc FIR low-pass with group-delay compensation.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::homodyne::FrameSet;

pub const DEFAULT_TAPS: usize = 255;
pub const DEFAULT_CUTOFF: f64 = 100e6;

/// Hamming-windowed sinc taps with unit DC gain.
pub fn design_lowpass(taps: usize, cutoff: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if taps % 2 == 0 {
        return Err(Error::input(format!("FIR tap count must be odd, got {taps}")));
    }
    if !(cutoff > 0.0 && cutoff < sample_rate / 2.0) {
        return Err(Error::input(format!(
            "cutoff {cutoff} Hz must lie in (0, {} Hz)",
            sample_rate / 2.0
        )));
    }
    let m = (taps / 2) as f64;
    let fc = cutoff / sample_rate;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let k = n as f64 - m;
            let sinc = if k == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * k).sin() / (PI * k) };
            let window = if taps == 1 { 1.0 } else { 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos() };
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= sum);
    Ok(h)
}

/// |H(f)| of an FIR.
pub fn magnitude_response(h: &[f64], f: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * f / sample_rate;
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, c)| {
        (re + c * (k as f64 * w).cos(), im - c * (k as f64 * w).sin())
    });
    (re * re + im * im).sqrt()
}

/// White-noise variance ratio Σ h².
pub fn noise_bandwidth_ratio(h: &[f64]) -> f64 {
    h.iter().map(|x| x * x).sum()
}

/// Filters every frame, removing the (taps − 1)/2 sample group delay so
/// the output stays aligned with the input time axis. Samples beyond the
/// record are treated as zero; the affected ends are recorded in
/// `transient_samples`.
pub fn fir_lowpass(fs: &FrameSet, taps: usize, cutoff: f64) -> Result<FrameSet> {
    fs.validate()?;
    let h = design_lowpass(taps, cutoff, 1.0 / fs.dt)?;
    let n = fs.n_samples;
    let delay = taps / 2;
    let len = (n + taps - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut hf: Vec<Complex<f64>> =
        h.iter().map(|&x| Complex::new(x, 0.0)).chain(std::iter::repeat(Complex::new(0.0, 0.0))).take(len).collect();
    fwd.process(&mut hf);
    let scale = 1.0 / len as f64;
    let mut data = vec![0.0; fs.data.len()];
    data.par_chunks_mut(n).zip(fs.data.par_chunks(n)).for_each(|(out, x)| {
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
        for (b, &v) in buf.iter_mut().zip(x) {
            *b = Complex::new(v, 0.0);
        }
        fwd.process(&mut buf);
        for (b, hk) in buf.iter_mut().zip(&hf) {
            *b *= hk;
        }
        inv.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf[delay..delay + n]) {
            *o = b.re * scale;
        }
    });
    Ok(FrameSet { data, transient_samples: fs.transient_samples.max(delay), ..fs.clone() })
}
