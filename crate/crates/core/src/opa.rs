//! Single-pass OPA: pump power/phase → squeezing trajectory.
//!
//! The waveguide responds on THz scales, so r(t) follows the pump
//! instantaneously through r = gain_coeff·√P and θ = pump phase / 2.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pump::PowerTrace;
use crate::quantum::SqueezeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainFit {
    /// mW^(−1/2).
    pub gain_coeff: f64,
    /// RMS residual of r.
    pub fit_residual: f64,
}

/// Least-squares fit of r = k·√P to measured parametric gains G = e^(2r).
///
/// `points` are (pump power mW, parametric gain). A single point is enough
/// to identify k; the residual is zero in that case.
pub fn fit_gain_curve(points: &[(f64, f64)]) -> Result<GainFit> {
    if points.is_empty() {
        return Err(Error::input("no gain points"));
    }
    for &(p, g) in points {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::input(format!("pump power must be positive, got {p}")));
        }
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::input(format!("parametric gain must be positive, got {g}")));
        }
        if g < 1.0 {
            return Err(Error::input(format!("parametric gain {g} < 1 is not a maximum gain")));
        }
    }
    let mut powers: Vec<f64> = points.iter().map(|p| p.0).collect();
    powers.sort_by(f64::total_cmp);
    if powers.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::input("pump powers must be distinct"));
    }
    // minimize Σ (r_i − k√P_i)²  ⇒  k = Σ r_i√P_i / Σ P_i
    let rs: Vec<f64> = points.iter().map(|&(_, g)| g.ln() / 2.0).collect();
    let num: f64 = points.iter().zip(&rs).map(|(&(p, _), r)| r * p.sqrt()).sum();
    let den: f64 = points.iter().map(|&(p, _)| p).sum();
    let gain_coeff = num / den;
    if !(gain_coeff > 0.0) {
        return Err(Error::input("gain curve is flat (G = 1 everywhere); no squeezing to fit"));
    }
    let ss: f64 = points
        .iter()
        .zip(&rs)
        .map(|(&(p, _), r)| (r - gain_coeff * p.sqrt()).powi(2))
        .sum();
    Ok(GainFit { gain_coeff, fit_residual: (ss / points.len() as f64).sqrt() })
}

/// Component losses between the OPA and the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub opa_internal: f64,
    pub propagation: f64,
    pub mode_matching: f64,
    pub photodiode: f64,
}

impl Default for LossBudget {
    fn default() -> Self {
        Self { opa_internal: 0.09, propagation: 0.02, mode_matching: 0.03, photodiode: 0.01 }
    }
}

impl LossBudget {
    pub fn validate(&self) -> Result<()> {
        for l in [self.opa_internal, self.propagation, self.mode_matching, self.photodiode] {
            if !(0.0..1.0).contains(&l) {
                return Err(Error::input(format!("component loss {l} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Compounded loss 1 − ∏(1 − ℓᵢ).
    pub fn total(&self) -> f64 {
        1.0 - [self.opa_internal, self.propagation, self.mode_matching, self.photodiode]
            .iter()
            .map(|l| 1.0 - l)
            .product::<f64>()
    }
}

/// Time series of (r, θ) with a fixed loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezerTrajectory {
    pub dt: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub loss: f64,
}

impl SqueezerTrajectory {
    pub fn constant(r: f64, theta: f64, loss: f64, dt: f64, n: usize) -> Result<Self> {
        SqueezeParams::new(r, theta, loss)?;
        Ok(Self { dt, r: vec![r; n], theta: vec![theta; n], loss })
    }

    pub fn vacuum(dt: f64, n: usize) -> Self {
        Self { dt, r: vec![0.0; n], theta: vec![0.0; n], loss: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn params_at(&self, i: usize) -> SqueezeParams {
        SqueezeParams { r: self.r[i], theta: self.theta[i], loss: self.loss }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.len() != self.theta.len() {
            return Err(Error::input("trajectory r and theta lengths differ"));
        }
        if self.r.is_empty() || !(self.dt > 0.0) {
            return Err(Error::input("trajectory is empty or has non-positive dt"));
        }
        for i in 0..self.len() {
            self.params_at(i).validate()?;
        }
        Ok(())
    }

    /// Zero-order-hold resampling onto a grid with spacing `dt`.
    pub fn resampled(&self, dt: f64) -> Self {
        if (dt - self.dt).abs() <= 1e-12 * self.dt {
            return self.clone();
        }
        let n = ((self.len() as f64 * self.dt) / dt).round().max(1.0) as usize;
        let idx = |k: usize| (((k as f64 * dt) / self.dt).floor() as usize).min(self.len() - 1);
        Self {
            dt,
            r: (0..n).map(|k| self.r[idx(k)]).collect(),
            theta: (0..n).map(|k| self.theta[idx(k)]).collect(),
            loss: self.loss,
        }
    }

    /// Instantaneous homodyne variance at LO phase `phi` for every sample.
    pub fn variance_trace(&self, phi: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.params_at(i).variance_at_phase(phi)).collect()
    }
}

/// r(t) = gain_coeff·√P(t), θ(t) = pump_phase(t) / 2.
pub fn trajectory_from_pump(power: &PowerTrace, fit: &GainFit, loss: f64) -> Result<SqueezerTrajectory> {
    if power.phase.len() != power.power_mw.len() {
        return Err(Error::input("power and phase traces differ in length"));
    }
    if !(0.0..1.0).contains(&loss) {
        return Err(Error::domain(format!("loss must lie in [0, 1), got {loss}")));
    }
    if let Some(i) = power.power_mw.iter().position(|&p| !(p >= 0.0)) {
        return Err(Error::input(format!("negative pump power at sample {i}; clamp upstream")));
    }
    let r = power.power_mw.iter().map(|p| fit.gain_coeff * p.sqrt()).collect();
    let theta = power
        .phase
        .iter()
        .map(|ph| (ph.rem_euclid(2.0 * PI) / 2.0).rem_euclid(PI))
        .collect();
    Ok(SqueezerTrajectory { dt: power.dt, r, theta, loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::r_from_pure_db;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn synthetic_round_trip() {
        let k = 0.1224;
        let pts: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 4.0, 6.5]
            .iter()
            .map(|&p: &f64| (p, (2.0 * k * p.sqrt()).exp()))
            .collect();
        let fit = fit_gain_curve(&pts).unwrap();
        assert_abs_diff_eq!(fit.gain_coeff, k, epsilon = 1e-10);
        assert!(fit.fit_residual < 1e-12);
    }

    #[test]
    fn single_anchor_point() {
        let fit = fit_gain_curve(&[(6.5, (2.0 * 0.312f64).exp())]).unwrap();
        assert_abs_diff_eq!(fit.gain_coeff, 0.312 / 6.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.gain_coeff, 0.1224, epsilon = 1e-4);
    }

    #[test]
    fn degenerate_fits_rejected() {
        assert!(fit_gain_curve(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(fit_gain_curve(&[(1.0, -1.0)]).is_err());
        assert!(fit_gain_curve(&[(1.0, 0.0)]).is_err());
        assert!(fit_gain_curve(&[(1.0, 1.2), (1.0, 1.3)]).is_err());
        assert!(fit_gain_curve(&[]).is_err());
    }

    #[test]
    fn loss_budget_total() {
        let b = LossBudget::default();
        assert_abs_diff_eq!(b.total(), 1.0 - 0.91 * 0.98 * 0.97 * 0.99, epsilon = 1e-15);
        assert!(b.total() > 0.14 && b.total() < 0.15);
    }

    fn trace(p: Vec<f64>, ph: Vec<f64>) -> PowerTrace {
        PowerTrace { dt: 1e-9, power_mw: p, phase: ph, clamp_count: 0 }
    }

    #[test]
    fn trajectory_examples() {
        let k = r_from_pure_db(2.71).unwrap() / 6.5f64.sqrt();
        let fit = GainFit { gain_coeff: k, fit_residual: 0.0 };
        let t0 = trajectory_from_pump(&trace(vec![0.0; 5], vec![0.0; 5]), &fit, 0.183).unwrap();
        assert!(t0.r.iter().all(|&r| r == 0.0));
        let t = trajectory_from_pump(&trace(vec![6.5; 4], vec![0.0, PI, 0.0, PI]), &fit, 0.183).unwrap();
        for &r in &t.r {
            assert_abs_diff_eq!(r, 0.312, epsilon = 1e-3);
        }
        assert_eq!(t.theta, vec![0.0, FRAC_PI_2, 0.0, FRAC_PI_2]);
        assert_eq!(t.loss, 0.183);
        t.validate().unwrap();
        assert!(trajectory_from_pump(&trace(vec![-1.0], vec![0.0]), &fit, 0.1).is_err());
        assert!(trajectory_from_pump(&trace(vec![1.0], vec![]), &fit, 0.1).is_err());
    }

    #[test]
    fn quadrupled_power_doubles_r() {
        let fit = GainFit { gain_coeff: 0.13, fit_residual: 0.0 };
        let a = trajectory_from_pump(&trace(vec![1.3, 2.2], vec![0.0; 2]), &fit, 0.0).unwrap();
        let b = trajectory_from_pump(&trace(vec![5.2, 8.8], vec![0.0; 2]), &fit, 0.0).unwrap();
        for (x, y) in a.r.iter().zip(&b.r) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-15);
        }
    }

    #[test]
    fn resampling_holds_values() {
        let t = SqueezerTrajectory { dt: 2e-9, r: vec![0.1, 0.2], theta: vec![0.0, FRAC_PI_2], loss: 0.1 };
        let u = t.resampled(1e-9);
        assert_eq!(u.r, vec![0.1, 0.1, 0.2, 0.2]);
        assert_eq!(u.theta[3], FRAC_PI_2);
    }
}
