//! Gain-curve fit from parametric-gain measurements and emission of a
//! calibration file usable by every other scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use super::{Check, RunContext};
use crate::error::{Error, Result};
use crate::opa::{fit_gain_curve, GainFit};
use crate::pump::Calibration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateParams {
    /// Measured (pump mW, parametric gain) pairs. Empty means synthesize
    /// them from the input calibration at `synthetic_powers_mw`.
    pub measurements: Vec<(f64, f64)>,
    pub synthetic_powers_mw: Vec<f64>,
    /// Relative standard deviation of synthesized gain readings.
    pub gain_noise: f64,
    /// Largest accepted relative change of the gain coefficient.
    pub max_relative_change: f64,
}

impl Default for CalibrateParams {
    fn default() -> Self {
        Self {
            measurements: Vec::new(),
            synthetic_powers_mw: vec![0.5, 1.0, 2.0, 4.0, 6.5],
            gain_noise: 0.005,
            max_relative_change: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateReport {
    pub measurements: Vec<(f64, f64)>,
    pub synthetic: bool,
    pub fit: GainFit,
    pub input_gain_coeff: f64,
    pub relative_change: f64,
    pub calibration: Calibration,
}

pub fn simulate(ctx: &RunContext) -> Result<CalibrateReport> {
    let p = &ctx.params.calibrate;
    let cal = &ctx.calibration;
    let synthetic = p.measurements.is_empty();
    let measurements = if synthetic {
        if !(p.gain_noise >= 0.0 && p.gain_noise < 0.5) {
            return Err(Error::input("gain_noise must lie in [0, 0.5)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.sub_seed(0));
        p.synthetic_powers_mw
            .iter()
            .map(|&pw| {
                let g = (2.0 * cal.gain_coeff * pw.max(0.0).sqrt()).exp();
                let z: f64 = rng.sample(StandardNormal);
                (pw, (g * (1.0 + p.gain_noise * z)).max(1.0))
            })
            .collect()
    } else {
        p.measurements.clone()
    };
    let fit = fit_gain_curve(&measurements)?;
    let calibration = Calibration { gain_coeff: fit.gain_coeff, gain_fit_residual: Some(fit.fit_residual), ..cal.clone() };
    calibration.validate()?;
    Ok(CalibrateReport {
        relative_change: fit.gain_coeff / cal.gain_coeff - 1.0,
        input_gain_coeff: cal.gain_coeff,
        measurements,
        synthetic,
        fit,
        calibration,
    })
}

pub fn run(ctx: &RunContext, files: &mut BTreeMap<String, String>, out: &mut Vec<Check>) -> Result<Value> {
    let rep = simulate(ctx)?;
    let mut csv = String::from("power_mw,measured_gain,fitted_gain\n");
    for &(pw, g) in &rep.measurements {
        csv.push_str(&format!("{pw},{g},{}\n", (2.0 * rep.fit.gain_coeff * pw.sqrt()).exp()));
    }
    files.insert("gain_curve.csv".into(), ctx.csv("parametric gain curve", &csv));
    files.insert("calibration.json".into(), ctx.json(&rep.calibration)?);
    files.insert("calibrate_report.json".into(), ctx.json(&rep)?);
    let limit = ctx.params.calibrate.max_relative_change;
    out.push(Check::new(
        "gain_coeff_stable",
        rep.relative_change.abs() <= limit,
        format!("{:.6} vs input {:.6} ({:+.3}%)", rep.fit.gain_coeff, rep.input_gain_coeff, 100.0 * rep.relative_change),
    ));
    Ok(serde_json::json!({ "gain_coeff": rep.fit.gain_coeff, "fit_residual": rep.fit.fit_residual }))
}
