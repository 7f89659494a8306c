//! Digital twin of a programmable time-multiplexed squeezed light source.
//!
//! The pipeline runs AWG program → pump power → squeezer trajectory →
//! homodyne frames → analysis (spectra, variance traces, temporal-mode
//! tomography, Duan inseparability). Every stage is a pure function of its
//! inputs; Monte-Carlo stages are seeded and reproducible bit-for-bit.
//!
//! Quadratures use the ħ = 2 convention throughout, so the vacuum variance
//! is exactly 1 ("shot-noise units").

pub mod dsp;
pub mod error;
pub mod estimation;
pub mod homodyne;
pub mod opa;
pub mod pump;
pub mod quantum;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
