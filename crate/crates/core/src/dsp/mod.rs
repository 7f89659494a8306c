//! Measurement-side processing: spectra, FIR filtering, variance traces,
//! temporal modes and the pure-squeezing/loss inversion.

pub mod fir;
pub mod inversion;
pub mod modes;
pub mod spectrum;
pub mod variance;

pub use fir::{design_lowpass, fir_lowpass};
pub use inversion::{estimate_pure_squeezing_and_loss, PureSqueezingEstimate};
pub use modes::{
    extract_quadrature, make_mode, mode_spectrum, quadratures, vacuum_scale, ModeFamily, ModeParams, ModeSpectrum,
    TemporalMode,
};
pub use spectrum::{average_spectrum, band_average, SpectrumEstimate};
pub use variance::{pointwise_variance, VarianceTrace};

use crate::error::{Error, Result};
use crate::homodyne::FrameSet;

pub(crate) fn check_compatible(a: &FrameSet, b: &FrameSet) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if (a.dt - b.dt).abs() > 1e-12 * a.dt {
        return Err(Error::input(format!("sample intervals differ: {} vs {}", a.dt, b.dt)));
    }
    if a.n_samples != b.n_samples {
        return Err(Error::input(format!(
            "frame lengths differ: {} vs {}",
            a.n_samples, b.n_samples
        )));
    }
    Ok(())
}
