//! Gaussian state tomography, Wigner-ellipse geometry and EPR verification.

pub mod ellipse;
pub mod epr;
pub mod oracle;
pub mod tomography;

pub use ellipse::{wigner_ellipse, wigner_ellipse_at, Ellipse};
pub use epr::{duan_oracle, run_epr_analysis, EprReport, EprScanPoint, EprSearch};
pub use oracle::{mode_covariance_oracle, spectrum_level_oracle};
pub use tomography::{ml_gaussian_tomography, PhaseGroup, TomographyInput, TomographyResult, TomographyStderr};
