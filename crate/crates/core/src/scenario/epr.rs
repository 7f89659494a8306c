//! Two-mode inseparability: a ±V alternation produces x- and p-squeezed
//! half periods whose frequency-bin modes g₁, g₂ are EPR correlated.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use super::{Check, RunContext};
use crate::dsp::ModeParams;
use crate::error::{Error, Result};
use crate::estimation::{duan_oracle, run_epr_analysis, EprReport, EprSearch};
use crate::homodyne::{simulate_frames, simulate_vacuum_reference, LoSchedule};
use crate::pump::{waveforms, AwgProgram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EprParams {
    pub voltage: f64,
    /// Duration of each +V or −V segment, s.
    pub half_period: f64,
    pub duration: f64,
    /// Zero-volt padding before and after the alternation, s.
    pub pad: f64,
    pub gamma: f64,
    pub t_w: f64,
    /// Mode centers are scanned over ±scan_half_width around the aligned
    /// center, in steps of scan_step.
    pub scan_half_width: f64,
    pub scan_step: f64,
    /// Required (4 − duan)/stderr.
    pub min_margin_sigma: f64,
}

impl Default for EprParams {
    fn default() -> Self {
        let m = ModeParams::epr(0.0);
        Self {
            voltage: 0.16,
            half_period: 50e-9,
            duration: 1000e-9,
            pad: 200e-9,
            gamma: m.gamma,
            t_w: m.t_w,
            scan_half_width: 10e-9,
            scan_step: 1e-9,
            min_margin_sigma: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprScenarioReport {
    #[serde(flatten)]
    pub analysis: EprReport,
    /// Expected Duan value at the selected mode center.
    pub oracle: f64,
    /// (duan − oracle) / stderr.
    pub oracle_z: f64,
}

/// The padded alternation program and the scan aligned with it.
pub fn program_and_search(p: &EprParams, rate: f64) -> Result<(AwgProgram, EprSearch)> {
    if !(p.half_period > 0.0 && p.duration >= 2.0 * p.half_period && p.pad >= 0.0) {
        return Err(Error::input("EPR program needs half_period > 0, duration >= 2 half periods, pad >= 0"));
    }
    let cycles = (p.duration / (2.0 * p.half_period)).round() as usize;
    let core = waveforms::square(p.voltage, p.half_period, 0.0, cycles, rate);
    let pad = (p.pad * rate).round() as usize;
    let prog = core.padded(pad, pad);
    let dt = 1.0 / rate;
    // f₁ covers [t_c + nT, t_c + (n+½)T); aligning its first half period with
    // the +V (x-squeezed) segments puts t_c half a sample before a segment
    // start near the program center.
    let center = pad as f64 * dt + (cycles as f64 * 2.0 * p.half_period / 2.0);
    let seg = 2.0 * p.half_period;
    let aligned = pad as f64 * dt + ((center - pad as f64 * dt) / seg).round() * seg - 0.5 * dt;
    let mode = ModeParams { gamma: p.gamma, t_w: p.t_w, period: Some(seg), t_c: aligned };
    let search = EprSearch {
        mode,
        t_c_min: aligned - p.scan_half_width,
        t_c_max: aligned + p.scan_half_width,
        step: p.scan_step,
    };
    Ok((prog, search))
}

pub fn simulate(ctx: &RunContext) -> Result<(EprScenarioReport, AwgProgram)> {
    let p = &ctx.params.epr;
    let det = ctx.params.detector;
    let (prog, search) = program_and_search(p, det.sample_rate)?;
    prog.validate(&ctx.calibration)?;
    let (_, _, traj) = ctx.pump_chain(&prog)?;
    let n = ctx.n_frames;
    let fx = simulate_frames(&traj, &det, &LoSchedule::single(0.0, n), ctx.sub_seed(0))?;
    let fp = simulate_frames(&traj, &det, &LoSchedule::single(FRAC_PI_2, n), ctx.sub_seed(1))?;
    let reference = simulate_vacuum_reference(&det, traj.len(), n, ctx.sub_seed(2))?;
    let analysis = run_epr_analysis(&fx, &fp, &reference, &search)?;
    let oracle = duan_oracle(&traj, &det, analysis.mode)?;
    let oracle_z = (analysis.duan - oracle) / analysis.stderr;
    Ok((EprScenarioReport { analysis, oracle, oracle_z }, prog))
}

pub fn checks(ctx: &RunContext, rep: &EprScenarioReport) -> Vec<Check> {
    let a = &rep.analysis;
    let need = ctx.params.epr.min_margin_sigma;
    vec![
        Check::new(
            "duan_below_four",
            a.entangled && a.margin_sigma >= need,
            format!("duan {:.4} ± {:.4}, margin {:.1} sigma (need {need})", a.duan, a.stderr, a.margin_sigma),
        ),
        Check::new(
            "duan_matches_oracle",
            rep.oracle_z.abs() <= 3.0,
            format!("oracle {:.4}, deviation {:.2} SE", rep.oracle, rep.oracle_z),
        ),
    ]
}

pub fn run(ctx: &RunContext, files: &mut BTreeMap<String, String>, out: &mut Vec<Check>) -> Result<Value> {
    let (rep, prog) = simulate(ctx)?;
    files.insert("epr_program.csv".into(), ctx.csv("alternating AWG program", &prog.to_csv()));
    files.insert("epr_report.json".into(), ctx.json(&rep)?);
    out.extend(checks(ctx, &rep));
    Ok(serde_json::json!({
        "duan": rep.analysis.duan,
        "stderr": rep.analysis.stderr,
        "effective_db": rep.analysis.effective_db,
        "entangled": rep.analysis.entangled,
        "oracle": rep.oracle,
    }))
}
