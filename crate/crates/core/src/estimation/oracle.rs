//! Expected single-mode statistics for the simulated detection chain.

use crate::dsp::TemporalMode;
use crate::error::{Error, Result};
use crate::homodyne::{DetectorModel, WARMUP_SAMPLES};
use crate::opa::SqueezerTrajectory;
use crate::quantum::GaussianState;

const RESPONSE_LEN: usize = 512;

/// Covariance of the mode quadratures (x, p) after vacuum normalization.
///
/// A recorded sample is y = (h ∗ ξ) + e, so the mode integral with weights
/// v picks up Σ_k C_k u_k² + σ_e² Σ v², where u_k = Σ_i v_i h_{i−k} and C_k
/// is the squeezer covariance at sample k. The vacuum scale is the same sum
/// with C_k = I.
pub fn mode_covariance_oracle(
    traj: &SqueezerTrajectory,
    det: &DetectorModel,
    mode: &TemporalMode,
) -> Result<GaussianState> {
    det.validate()?;
    traj.validate()?;
    if (mode.dt - det.dt()).abs() > 1e-12 * mode.dt {
        return Err(Error::input("mode and detector sample intervals differ"));
    }
    let traj = traj.resampled(det.dt());
    if mode.end() > traj.len() {
        return Err(Error::input("mode support extends past the trajectory"));
    }
    let h = det.impulse_response(RESPONSE_LEN);
    let first = (mode.start as isize - h.len() as isize + 1).max(-(WARMUP_SAMPLES as isize));
    let white = det.electronic_noise_variance() * mode.weights.iter().map(|w| w * w).sum::<f64>();
    let mut acc = [[0.0; 2]; 2];
    let mut vac = white;
    for k in first..mode.end() as isize {
        let u: f64 = mode
            .weights
            .iter()
            .enumerate()
            .filter_map(|(j, w)| {
                let lag = (mode.start + j) as isize - k;
                (0..h.len() as isize).contains(&lag).then(|| w * h[lag as usize])
            })
            .sum();
        let c = GaussianState::squeezed(&traj.params_at(k.max(0) as usize)).cov;
        for a in 0..2 {
            for b in 0..2 {
                acc[a][b] += c[a][b] * u * u;
            }
        }
        vac += u * u;
    }
    let cov = [
        [(acc[0][0] + white) / vac, acc[0][1] / vac],
        [acc[1][0] / vac, (acc[1][1] + white) / vac],
    ];
    Ok(GaussianState { mean: [0.0; 2], cov })
}

/// Expected spectrum level (dB) at `f` for white quadrature variance `v`.
pub fn spectrum_level_oracle(v: f64, det: &DetectorModel, f: f64) -> f64 {
    let h2 = det.power_response(f);
    let e = det.electronic_noise_variance();
    10.0 * ((v * h2 + e) / (h2 + e)).log10()
}
