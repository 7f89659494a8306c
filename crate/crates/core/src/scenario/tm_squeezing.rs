//! Time-multiplexed squeezing: a staircase of per-slot squeezing targets,
//! multi-phase homodyne frames and Gaussian tomography of every slot.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use super::{Check, RunContext};
use crate::dsp::modes::{reference_autocovariance, vacuum_scale_from_autocovariance, VACUUM_MAX_LAG};
use crate::dsp::{make_mode, quadratures, ModeFamily, ModeParams};
use crate::error::{Error, Result};
use crate::estimation::ellipse::wrap_half_turn_deg;
use crate::estimation::{mode_covariance_oracle, ml_gaussian_tomography, wigner_ellipse, Ellipse, TomographyInput, TomographyResult};
use crate::homodyne::{simulate_frames, simulate_vacuum_reference, LoSchedule};
use crate::pump::{compile_pulse_train, PulseTrainSpec, Quadrature, SlotTarget, DEFAULT_MARGIN, DEFAULT_MODE_WIDTH};
use crate::quantum::{GaussianState, PHYSICALITY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TmParams {
    pub slots: Vec<SlotTarget>,
    pub mode_width: f64,
    pub margin: f64,
    pub n_phases: usize,
    /// LO phase increment, rad.
    pub phase_step: f64,
    pub pad_samples: usize,
    /// Largest accepted |measured − expected| ellipse angle, degrees.
    pub angle_tolerance_deg: f64,
}

impl Default for TmParams {
    fn default() -> Self {
        let sq = |db, quadrature| SlotTarget::Squeezed { squeezing_db: db, quadrature };
        Self {
            slots: vec![
                sq(2.71, Quadrature::XSqueezed),
                sq(1.5, Quadrature::XSqueezed),
                SlotTarget::Vacuum,
                sq(1.5, Quadrature::PSqueezed),
                sq(2.71, Quadrature::PSqueezed),
                sq(2.71, Quadrature::XSqueezed),
            ],
            mode_width: DEFAULT_MODE_WIDTH,
            margin: DEFAULT_MARGIN,
            n_phases: 12,
            phase_step: std::f64::consts::PI / 12.0,
            pad_samples: 64,
            angle_tolerance_deg: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub target: SlotTarget,
    /// Mode center, seconds from the start of the record.
    pub t_c: f64,
    pub result: TomographyResult,
    /// Expected covariance for the simulated chain.
    pub theory: GaussianState,
    pub theory_ellipse: Ellipse,
    /// Measured minus expected angle, wrapped to (−90°, 90°].
    pub angle_error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmReport {
    pub n_frames_per_phase: usize,
    pub slot_period: f64,
    pub lo_phases: Vec<f64>,
    pub slots: Vec<SlotRecord>,
}

pub fn simulate(ctx: &RunContext) -> Result<(TmReport, crate::pump::AwgProgram, crate::pump::PowerTrace)> {
    let p = &ctx.params.tm_squeezing;
    let det = ctx.params.detector;
    if p.n_phases == 0 || p.n_phases as f64 * p.phase_step >= 2.0 * std::f64::consts::PI {
        return Err(Error::input("LO phases must be at least one and stay below 2pi"));
    }
    let spec = PulseTrainSpec {
        mode_width: p.mode_width,
        margin: p.margin,
        sample_rate_hz: det.sample_rate,
        ..PulseTrainSpec::new(p.slots.iter().copied())
    };
    let prog = compile_pulse_train(&spec, &ctx.calibration, &ctx.params.modulator)?.padded(p.pad_samples, p.pad_samples);
    let (_, pump, traj) = ctx.pump_chain(&prog)?;
    let lo = LoSchedule::uniform(p.n_phases, p.phase_step, ctx.n_frames);
    let fs = simulate_frames(&traj, &det, &lo, ctx.sub_seed(0))?;
    let reference = simulate_vacuum_reference(&det, traj.len(), ctx.n_frames, ctx.sub_seed(1))?;
    let acov = reference_autocovariance(&reference, VACUUM_MAX_LAG)?;
    let offset = p.pad_samples as f64 * det.dt();
    let mut slots = Vec::with_capacity(spec.slots.len());
    for (k, c) in spec.mode_centers().into_iter().enumerate() {
        let t_c = c + offset;
        let mode = make_mode(ModeFamily::TfMode, ModeParams::tomography(t_c), det.dt())?;
        let scale = vacuum_scale_from_autocovariance(&acov, &mode);
        let values = quadratures(&fs, &mode, scale)?;
        let result = ml_gaussian_tomography(&TomographyInput::from_tagged(&fs.phase_tags, &values)?)?;
        let theory = mode_covariance_oracle(&traj, &det, &mode)?;
        let theory_ellipse = wigner_ellipse(&theory)?;
        let angle_error_deg = wrap_half_turn_deg(result.ellipse.angle_deg - theory_ellipse.angle_deg);
        slots.push(SlotRecord { slot: k, target: spec.slots[k].target, t_c, result, theory, theory_ellipse, angle_error_deg });
    }
    let lo_phases = lo.entries.iter().map(|e| e.phase).collect();
    Ok((TmReport { n_frames_per_phase: ctx.n_frames, slot_period: spec.period(), lo_phases, slots }, prog, pump))
}

pub fn checks(ctx: &RunContext, rep: &TmReport) -> Vec<Check> {
    let tol = ctx.params.tm_squeezing.angle_tolerance_deg;
    let mut out = Vec::new();
    for s in &rep.slots {
        let det = s.result.state.det();
        out.push(Check::new(
            &format!("slot{}_uncertainty", s.slot),
            det >= 1.0 - PHYSICALITY_TOL,
            format!("det {det:.6}"),
        ));
        match s.target {
            SlotTarget::Squeezed { .. } => out.push(Check::new(
                &format!("slot{}_angle", s.slot),
                s.angle_error_deg.abs() <= tol,
                format!(
                    "{:.3} deg vs expected {:.3} deg",
                    s.result.ellipse.angle_deg, s.theory_ellipse.angle_deg
                ),
            )),
            SlotTarget::Vacuum => {
                let c = s.result.state.cov;
                let se = &s.result.fisher_stderr;
                let z = [(c[0][0] - 1.0) / se[2], (c[1][1] - 1.0) / se[3], c[0][1] / se[4]];
                out.push(Check::new(
                    &format!("slot{}_vacuum", s.slot),
                    z.iter().all(|z| z.abs() <= 3.0),
                    format!("(Cxx, Cpp, Cxp) deviations in SE: {:.2}, {:.2}, {:.2}", z[0], z[1], z[2]),
                ));
            }
        }
    }
    out
}

pub fn run(ctx: &RunContext, files: &mut BTreeMap<String, String>, out: &mut Vec<Check>) -> Result<Value> {
    let (rep, prog, pump) = simulate(ctx)?;
    files.insert("tm_program.csv".into(), ctx.csv("staircase AWG program", &prog.to_csv()));
    files.insert("tm_pump.csv".into(), ctx.csv("staircase pump after modulator", &pump.to_csv(prog.trigger_offset_s)));
    files.insert("tomography.json".into(), ctx.json(&rep)?);
    out.extend(checks(ctx, &rep));
    let angles: Vec<f64> = rep.slots.iter().map(|s| s.result.ellipse.angle_deg).collect();
    Ok(serde_json::json!({ "n_slots": rep.slots.len(), "angles_deg": angles }))
}
