//! Pump-shaping demonstrations: square, sine, Gaussian and free-form AWG
//! programs, their pump traces and the resulting quadrature variance.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use super::{Check, RunContext};
use crate::dsp::{fir_lowpass, pointwise_variance};
use crate::error::{Error, Result};
use crate::homodyne::{simulate_frames, simulate_vacuum_reference, LoSchedule};
use crate::pump::{rise_time_10_90, waveforms, AwgProgram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformParams {
    pub voltage: f64,
    pub square_plateau: f64,
    pub square_gap: f64,
    pub square_cycles: usize,
    pub sine_freq: f64,
    pub sine_duration: f64,
    pub gaussian_fwhms: Vec<f64>,
    pub gaussian_spacing: f64,
    /// Zero-volt samples added before and after every program.
    pub pad_samples: usize,
    pub lo_phase: f64,
    pub fir_taps: usize,
    pub fir_cutoff: f64,
}

impl Default for WaveformParams {
    fn default() -> Self {
        Self {
            voltage: 0.16,
            square_plateau: 100e-9,
            square_gap: 20e-9,
            square_cycles: 2,
            sine_freq: 10e6,
            sine_duration: 400e-9,
            gaussian_fwhms: vec![40e-9, 20e-9, 10e-9],
            gaussian_spacing: 150e-9,
            pad_samples: 150,
            lo_phase: 0.0,
            fir_taps: crate::dsp::fir::DEFAULT_TAPS,
            fir_cutoff: crate::dsp::fir::DEFAULT_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramSummary {
    pub name: String,
    pub n_samples: usize,
    pub peak_ideal_mw: f64,
    pub peak_pump_mw: f64,
    pub clamp_count: usize,
    pub min_variance: f64,
    pub max_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformReport {
    pub n_frames: usize,
    pub programs: Vec<ProgramSummary>,
    /// Peak pump power of each Gaussian pulse, in program order, mW.
    pub gaussian_peaks_mw: Vec<f64>,
    /// 10–90% rise of the first square-wave edge, s.
    pub square_rise_time: Option<f64>,
}

/// The four demonstration programs, unpadded.
pub fn programs(p: &WaveformParams, rate: f64) -> Result<Vec<(&'static str, AwgProgram)>> {
    if p.gaussian_fwhms.is_empty() {
        return Err(Error::input("waveforms need at least one Gaussian FWHM"));
    }
    Ok(vec![
        ("square", waveforms::square(p.voltage, p.square_plateau, p.square_gap, p.square_cycles, rate)),
        ("sine", waveforms::sine(p.voltage, p.sine_freq, p.sine_duration, rate)),
        ("gaussian", waveforms::gaussian_pulses(p.voltage, &p.gaussian_fwhms, p.gaussian_spacing, rate)),
        ("arbitrary", waveforms::silhouettes(p.voltage, rate)),
    ])
}

pub fn run(ctx: &RunContext, files: &mut BTreeMap<String, String>, out: &mut Vec<Check>) -> Result<Value> {
    let p = &ctx.params.waveforms;
    let det = ctx.params.detector;
    let pad = p.pad_samples;
    let mut summaries = Vec::new();
    let mut gaussian_peaks_mw = Vec::new();
    let mut square_rise_time = None;
    for (k, (name, prog)) in programs(p, det.sample_rate)?.into_iter().enumerate() {
        if prog.is_empty() {
            return Err(Error::input(format!("program '{name}' has no samples")));
        }
        let prog = prog.padded(pad, pad);
        prog.validate(&ctx.calibration)?;
        let (ideal, pump, traj) = ctx.pump_chain(&prog)?;
        let lo = LoSchedule::single(p.lo_phase, ctx.n_frames);
        let fs = simulate_frames(&traj, &det, &lo, ctx.sub_seed(2 * k as u64))?;
        let reference = simulate_vacuum_reference(&det, traj.len(), ctx.n_frames, ctx.sub_seed(2 * k as u64 + 1))?;
        let fs = fir_lowpass(&fs, p.fir_taps, p.fir_cutoff)?;
        let reference = fir_lowpass(&reference, p.fir_taps, p.fir_cutoff)?;
        let mut vt = pointwise_variance(&fs, &reference)?;
        vt.t0 = prog.trigger_offset_s;

        let t0 = prog.trigger_offset_s;
        files.insert(format!("waveform_{name}_program.csv"), ctx.csv(&format!("{name} AWG program"), &prog.to_csv()));
        files.insert(format!("waveform_{name}_pump.csv"), ctx.csv(&format!("{name} pump after modulator"), &pump.to_csv(t0)));
        files.insert(
            format!("waveform_{name}_variance.csv"),
            vt.to_csv(&ctx.csv_header(&format!("{name} quadrature variance, LO phase {}", p.lo_phase))),
        );

        let settled = &vt.variance[fs.transient_samples..vt.variance.len() - fs.transient_samples];
        let peak = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        summaries.push(ProgramSummary {
            name: name.to_string(),
            n_samples: prog.len(),
            peak_ideal_mw: peak(&ideal.power_mw),
            peak_pump_mw: peak(&pump.power_mw),
            clamp_count: pump.clamp_count,
            min_variance: settled.iter().cloned().fold(f64::INFINITY, f64::min),
            max_variance: peak(settled),
        });
        match name {
            "gaussian" => {
                let w = (p.gaussian_spacing * det.sample_rate).round() as usize;
                gaussian_peaks_mw =
                    (0..p.gaussian_fwhms.len()).map(|j| peak(&pump.power_mw[pad + j * w..pad + (j + 1) * w])).collect();
            }
            "square" => {
                let plateau = (p.square_plateau * det.sample_rate).round() as usize;
                square_rise_time = rise_time_10_90(&pump.power_mw[..pad + plateau], pump.dt);
            }
            _ => {}
        }
    }
    let rep = WaveformReport { n_frames: ctx.n_frames, programs: summaries, gaussian_peaks_mw, square_rise_time };
    files.insert("waveforms_report.json".into(), ctx.json(&rep)?);

    let dt = det.dt();
    let rise = ctx.params.modulator.rise_time_10_90;
    out.push(Check::new(
        "square_rise_time",
        rep.square_rise_time.is_some_and(|t| (t - rise).abs() <= dt),
        format!("{:.3e} s vs {rise:.3e} s ± {dt:.1e} s", rep.square_rise_time.unwrap_or(f64::NAN)),
    ));
    out.push(Check::new(
        "gaussian_peaks_decrease",
        rep.gaussian_peaks_mw.windows(2).all(|w| w[1] < w[0]),
        format!("{:?} mW", rep.gaussian_peaks_mw),
    ));
    let sq = &rep.programs[0];
    out.push(Check::new(
        "square_variance_swings",
        sq.min_variance < 1.0 && sq.max_variance > 1.0,
        format!("min {:.4}, max {:.4}", sq.min_variance, sq.max_variance),
    ));
    Ok(serde_json::json!({
        "gaussian_peaks_mw": rep.gaussian_peaks_mw,
        "square_rise_time": rep.square_rise_time,
    }))
}
