use serde::{Deserialize, Serialize};
use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::quantum::GaussianState;

/// A contour of a Gaussian Wigner function.
///
/// `angle_deg` is the orientation of the minor (squeezed) axis in
/// (−90°, 90°]; it equals the squeezing angle θ of a squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle_deg: f64,
}

/// Relative eigenvalue gap below which a state counts as circular.
const CIRCULAR_TOL: f64 = 1e-12;

/// Maps an angle in degrees onto (−90°, 90°].
pub fn wrap_half_turn_deg(a: f64) -> f64 {
    let w = a.rem_euclid(180.0);
    if w > 90.0 {
        w - 180.0
    } else {
        w
    }
}

/// The 1/√e contour, where δᵀC⁻¹δ = 1: semi-axes are √eigenvalues(C).
pub fn wigner_ellipse(state: &GaussianState) -> Result<Ellipse> {
    wigner_ellipse_at(state, 1.0 / E.sqrt())
}

/// Contour where W equals `level` times its peak: δᵀC⁻¹δ = −2 ln(level).
pub fn wigner_ellipse_at(state: &GaussianState, level: f64) -> Result<Ellipse> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::input(format!("contour level must lie in (0, 1), got {level}")));
    }
    let p = state.physicality();
    if !p.symmetric || !p.positive_definite {
        return Err(Error::domain("covariance is not positive definite"));
    }
    let [[xx, xp], [_, pp]] = state.cov;
    let half_diff = 0.5 * (xx - pp);
    let rad = half_diff.hypot(xp);
    let mid = 0.5 * (xx + pp);
    let k = (-2.0 * level.ln()).sqrt();
    let angle_deg = if rad <= CIRCULAR_TOL * mid {
        0.0
    } else {
        // major axis at ½·atan2(2C_xp, C_xx − C_pp); minor is 90° away
        wrap_half_turn_deg(0.5 * (2.0 * xp).atan2(xx - pp).to_degrees() + 90.0)
    };
    Ok(Ellipse {
        center: state.mean,
        semi_major: k * (mid + rad).sqrt(),
        semi_minor: k * (mid - rad).sqrt(),
        angle_deg,
    })
}
