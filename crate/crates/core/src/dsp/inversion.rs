//! Recovers the pure squeezing parameter and the total loss from measured
//! squeezing and anti-squeezing levels.
//!
//! With S = (1−L)e^(−2r) + L and A = (1−L)e^(2r) + L (linear units),
//!
//!   A − 1 = (1−L)(e^(2r) − 1),   1 − S = (1−L)(e^(2r) − 1)e^(−2r),
//!
//! so the ratio eliminates L: e^(2r) = (A − 1)/(1 − S). The root is found
//! by bisection on F(r) = 1 + (1 − S)e^(2r) − A, which is strictly
//! increasing, and L then follows from L = 1 − (A − 1)/(e^(2r) − 1).
//! L < 0 exactly when A·S < 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{pure_db_from_r, variance_from_db};
use crate::stats::Estimate;

/// Bisection stops once the bracket on r is narrower than this.
pub const R_TOLERANCE: f64 = 1e-12;
/// Below this r the loss is poorly determined and the result is flagged.
pub const LOW_CONFIDENCE_R: f64 = 0.005;
/// Slack on A·S ≥ 1 for rounding in the dB conversion.
const PRODUCT_TOLERANCE: f64 = 1e-12;
/// Finite-difference step for error propagation, dB.
const FD_STEP_DB: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureSqueezingEstimate {
    /// 10·log10(e^(2r)).
    pub pure_db: Estimate,
    pub loss: Estimate,
    pub r: f64,
    pub low_confidence: bool,
}

/// (r, L) for exact linear inputs.
fn invert(s: f64, a: f64) -> Result<(f64, f64)> {
    let f = |r: f64| 1.0 + (1.0 - s) * (2.0 * r).exp() - a;
    if f(0.0) >= 0.0 {
        return Ok((0.0, f64::NAN));
    }
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::domain("squeezing parameter diverges"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > R_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let loss = 1.0 - (a - 1.0) / ((2.0 * r).exp() - 1.0);
    Ok((r, loss))
}

fn checked(s_db: f64, a_db: f64) -> Result<(f64, f64)> {
    if !(s_db.is_finite() && a_db.is_finite()) {
        return Err(Error::input("levels must be finite"));
    }
    let (s, a) = (variance_from_db(s_db), variance_from_db(a_db));
    if s >= 1.0 || a <= 1.0 {
        return Err(Error::NoSqueezing(format!(
            "need squeezing below and anti-squeezing above shot noise, got {s_db} dB / {a_db} dB"
        )));
    }
    if a * s < 1.0 - PRODUCT_TOLERANCE {
        return Err(Error::InfeasiblePair(format!(
            "{s_db} dB / {a_db} dB has A·S = {:.9} < 1, which implies negative loss",
            a * s
        )));
    }
    let (r, loss) = invert(s, a)?;
    // A·S within rounding of 1 is the lossless boundary
    Ok((r, if loss < 0.0 { 0.0 } else { loss }))
}

/// Inverts measured levels (dB relative to shot noise) to the pure
/// squeezing level and loss. Input standard errors are propagated by
/// central finite differences.
pub fn estimate_pure_squeezing_and_loss(s_db: Estimate, a_db: Estimate) -> Result<PureSqueezingEstimate> {
    let (r, loss) = checked(s_db.value, a_db.value)?;
    let low_confidence = r < LOW_CONFIDENCE_R;
    if low_confidence {
        return Ok(PureSqueezingEstimate {
            pure_db: Estimate::new(pure_db_from_r(r), f64::NAN),
            loss: Estimate::new(loss, f64::NAN),
            r,
            low_confidence,
        });
    }
    // ∂/∂x by central differences, falling back to one side at the edge
    // of the feasible region.
    let partial = |ds: f64, da: f64| -> (f64, f64) {
        let eval = |k: f64| checked(s_db.value + k * ds, a_db.value + k * da).ok();
        let h = FD_STEP_DB;
        match (eval(1.0), eval(-1.0)) {
            (Some(p), Some(m)) => ((pure_db_from_r(p.0) - pure_db_from_r(m.0)) / (2.0 * h), (p.1 - m.1) / (2.0 * h)),
            (Some(p), None) => ((pure_db_from_r(p.0) - pure_db_from_r(r)) / h, (p.1 - loss) / h),
            (None, Some(m)) => ((pure_db_from_r(r) - pure_db_from_r(m.0)) / h, (loss - m.1) / h),
            (None, None) => (f64::NAN, f64::NAN),
        }
    };
    let (dp_ds, dl_ds) = partial(FD_STEP_DB, 0.0);
    let (dp_da, dl_da) = partial(0.0, FD_STEP_DB);
    let quad = |x: f64, y: f64| ((x * s_db.stderr).powi(2) + (y * a_db.stderr).powi(2)).sqrt();
    Ok(PureSqueezingEstimate {
        pure_db: Estimate::new(pure_db_from_r(r), quad(dp_ds, dp_da)),
        loss: Estimate::new(loss, quad(dl_ds, dl_da)),
        r,
        low_confidence,
    })
}
