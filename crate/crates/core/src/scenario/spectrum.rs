//! Constant pump: squeezing and anti-squeezing spectra, band averages and
//! the pure-squeezing/loss inversion.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use super::{Check, RunContext};
use crate::dsp::{average_spectrum, band_average, estimate_pure_squeezing_and_loss, PureSqueezingEstimate, SpectrumEstimate};
use crate::error::{Error, Result};
use crate::estimation::spectrum_level_oracle;
use crate::homodyne::{simulate_frames, simulate_vacuum_reference, DetectorModel, LoSchedule};
use crate::opa::trajectory_from_pump;
use crate::pump::{ideal_pump_power, AwgProgram};
use crate::quantum::{db_from_variance, pure_db_from_r, SqueezeParams};
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    /// Constant AWG voltage, V.
    pub pump_voltage: f64,
    pub frame_len: usize,
    /// Analysis band, Hz.
    pub band: [f64; 2],
    /// Band near Nyquist used to check the roll-off toward shot noise, Hz.
    pub high_band: [f64; 2],
    /// Replaces the detector's electronic-noise clearance for this scenario.
    pub electronic_noise_clearance_db: Option<f64>,
    /// Largest accepted |measured − expected| band level, dB.
    pub tolerance_db: f64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            pump_voltage: 0.16,
            frame_len: 4096,
            band: [1e6, 10e6],
            high_band: [400e6, 499e6],
            electronic_noise_clearance_db: Some(30.0),
            tolerance_db: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLevels {
    pub measured: Estimate,
    pub expected: f64,
    pub high_band_measured: Estimate,
    pub high_band_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n_frames: usize,
    pub pump_power_mw: f64,
    pub r: f64,
    pub loss: f64,
    pub pure_db: f64,
    /// Broadband levels of the squeezer output, dB.
    pub squeezed_db: f64,
    pub antisqueezed_db: f64,
    pub band_hz: [f64; 2],
    pub squeezing: BandLevels,
    pub antisqueezing: BandLevels,
    pub inversion: PureSqueezingEstimate,
}

fn band_oracle(spec: &SpectrumEstimate, v: f64, det: &DetectorModel, band: [f64; 2]) -> f64 {
    let lv: Vec<f64> = spec
        .freqs
        .iter()
        .filter(|&&f| f >= band[0] && f <= band[1])
        .map(|&f| spectrum_level_oracle(v, det, f))
        .collect();
    lv.iter().sum::<f64>() / lv.len() as f64
}

/// Simulates and analyzes the constant-pump spectra.
pub fn simulate(ctx: &RunContext) -> Result<(SpectrumReport, SpectrumEstimate, SpectrumEstimate)> {
    let sp = &ctx.params.spectrum;
    let det = DetectorModel { electronic_noise_clearance_db: sp.electronic_noise_clearance_db, ..ctx.params.detector };
    if sp.frame_len < 16 {
        return Err(Error::input("spectrum frame_len must be at least 16"));
    }
    // a constant pump has no modulator dynamics
    let prog = AwgProgram::new(det.sample_rate, vec![sp.pump_voltage; sp.frame_len])?;
    prog.validate(&ctx.calibration)?;
    let pump = ideal_pump_power(&prog, &ctx.calibration)?;
    let traj = trajectory_from_pump(&pump, &ctx.gain_fit(), ctx.calibration.loss)?;
    let state = SqueezeParams::new(traj.r[0], traj.theta[0], traj.loss)?;
    let n = ctx.n_frames;
    let fs_s = simulate_frames(&traj, &det, &LoSchedule::single(0.0, n), ctx.sub_seed(0))?;
    let fs_a = simulate_frames(&traj, &det, &LoSchedule::single(FRAC_PI_2, n), ctx.sub_seed(1))?;
    let reference = simulate_vacuum_reference(&det, sp.frame_len, n, ctx.sub_seed(2))?;
    let spec_s = average_spectrum(&fs_s, &reference)?;
    let spec_a = average_spectrum(&fs_a, &reference)?;
    let levels = |spec: &SpectrumEstimate, v: f64| -> Result<BandLevels> {
        Ok(BandLevels {
            measured: band_average(spec, sp.band[0], sp.band[1])?,
            expected: band_oracle(spec, v, &det, sp.band),
            high_band_measured: band_average(spec, sp.high_band[0], sp.high_band[1])?,
            high_band_expected: band_oracle(spec, v, &det, sp.high_band),
        })
    };
    let squeezing = levels(&spec_s, state.squeezed_variance())?;
    let antisqueezing = levels(&spec_a, state.antisqueezed_variance())?;
    let inversion = estimate_pure_squeezing_and_loss(squeezing.measured, antisqueezing.measured)?;
    let report = SpectrumReport {
        n_frames: n,
        pump_power_mw: pump.power_mw[0],
        r: state.r,
        loss: state.loss,
        pure_db: pure_db_from_r(state.r),
        squeezed_db: db_from_variance(state.squeezed_variance())?,
        antisqueezed_db: db_from_variance(state.antisqueezed_variance())?,
        band_hz: sp.band,
        squeezing,
        antisqueezing,
        inversion,
    };
    Ok((report, spec_s, spec_a))
}

pub fn checks(ctx: &RunContext, rep: &SpectrumReport) -> Vec<Check> {
    let tol = ctx.params.spectrum.tolerance_db;
    let band = |name: &str, b: &BandLevels| {
        let dev = b.measured.value - b.expected;
        Check::new(
            name,
            dev.abs() <= tol,
            format!("{:.4} ± {:.4} dB vs expected {:.4} dB (tolerance {tol} dB)", b.measured.value, b.measured.stderr, b.expected),
        )
    };
    let rolloff = |name: &str, b: &BandLevels| {
        Check::new(
            name,
            b.high_band_measured.value.abs() < b.measured.value.abs(),
            format!("high band {:.4} dB vs analysis band {:.4} dB", b.high_band_measured.value, b.measured.value),
        )
    };
    let inv = &rep.inversion;
    // inversion of the expected band levels, which include detector effects
    let expected = estimate_pure_squeezing_and_loss(
        Estimate::exact(rep.squeezing.expected),
        Estimate::exact(rep.antisqueezing.expected),
    );
    let consistent = match expected {
        Ok(e) => !inv.low_confidence && (inv.pure_db.value - e.pure_db.value).abs() <= 3.0 * inv.pure_db.stderr,
        Err(_) => false,
    };
    vec![
        band("squeezing_band_level", &rep.squeezing),
        band("antisqueezing_band_level", &rep.antisqueezing),
        rolloff("squeezing_rolloff", &rep.squeezing),
        rolloff("antisqueezing_rolloff", &rep.antisqueezing),
        Check::new(
            "inversion_consistent",
            consistent,
            format!("pure {:.4} ± {:.4} dB, loss {:.4} ± {:.4}", inv.pure_db.value, inv.pure_db.stderr, inv.loss.value, inv.loss.stderr),
        ),
    ]
}

pub fn run(ctx: &RunContext, files: &mut BTreeMap<String, String>, out: &mut Vec<Check>) -> Result<Value> {
    let (rep, spec_s, spec_a) = simulate(ctx)?;
    files.insert("spectrum_squeezing.csv".into(), spec_s.to_csv(&ctx.csv_header("squeezing spectrum, LO phase 0")));
    files.insert(
        "spectrum_antisqueezing.csv".into(),
        spec_a.to_csv(&ctx.csv_header("anti-squeezing spectrum, LO phase pi/2")),
    );
    files.insert("spectrum_report.json".into(), ctx.json(&rep)?);
    out.extend(checks(ctx, &rep));
    Ok(serde_json::json!({
        "squeezing_db": rep.squeezing.measured,
        "antisqueezing_db": rep.antisqueezing.measured,
        "pure_db": rep.inversion.pure_db,
        "loss": rep.inversion.loss,
    }))
}
