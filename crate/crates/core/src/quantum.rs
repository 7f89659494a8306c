//! Shot-noise conventions, Gaussian-state algebra and the loss channel.
//!
//! Quadratures follow ħ = 2: the vacuum variance is 1 in every direction
//! and a physical single-mode covariance satisfies det(C) ≥ 1. Variances are
//! stored linearly; decibels appear only at presentation boundaries.

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, Estimate, N_SPLITS};

pub const HBAR: f64 = 2.0;
pub const VACUUM_VARIANCE: f64 = 1.0;
/// Eigenvalue / determinant tolerance for physicality checks.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Squeezing parameter, squeezing phase and loss of a single-mode source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub r: f64,
    /// Phase of the squeezed quadrature, radians in [0, π).
    pub theta: f64,
    /// Loss fraction in [0, 1).
    pub loss: f64,
}

impl SqueezeParams {
    pub fn new(r: f64, theta: f64, loss: f64) -> Result<Self> {
        let p = Self { r, theta, loss };
        p.validate()?;
        Ok(p)
    }

    pub fn vacuum() -> Self {
        Self { r: 0.0, theta: 0.0, loss: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::domain(format!("r must be >= 0, got {}", self.r)));
        }
        if !(self.theta.is_finite() && (0.0..std::f64::consts::PI).contains(&self.theta)) {
            return Err(Error::domain(format!("theta must lie in [0, pi), got {}", self.theta)));
        }
        check_loss(self.loss)
    }

    /// Variance along the squeezed quadrature.
    pub fn squeezed_variance(&self) -> f64 {
        (1.0 - self.loss) * (-2.0 * self.r).exp() + self.loss
    }

    /// Variance along the anti-squeezed quadrature.
    pub fn antisqueezed_variance(&self) -> f64 {
        (1.0 - self.loss) * (2.0 * self.r).exp() + self.loss
    }

    pub fn variance_at_phase(&self, phi: f64) -> f64 {
        variance_at_phase(self, phi)
    }
}

fn check_loss(loss: f64) -> Result<()> {
    if loss.is_finite() && (0.0..1.0).contains(&loss) {
        Ok(())
    } else {
        Err(Error::domain(format!("loss must lie in [0, 1), got {loss}")))
    }
}

/// Homodyne variance at LO phase `phi` for a lossy squeezed vacuum.
pub fn variance_at_phase(params: &SqueezeParams, phi: f64) -> f64 {
    let (s, c) = (phi - params.theta).sin_cos();
    // 1 + (1 − L)[(e^(−2r) − 1)cos² + (e^(2r) − 1)sin²], exact for r = 0
    1.0 + (1.0 - params.loss) * ((-2.0 * params.r).exp_m1() * c * c + (2.0 * params.r).exp_m1() * s * s)
}

/// Signed noise level in dB relative to shot noise (negative = squeezed).
pub fn db_from_variance(v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::domain(format!("variance must be positive, got {v}")));
    }
    Ok(10.0 * v.log10())
}

pub fn variance_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Squeezing parameter for a pure squeezing level given as positive dB.
pub fn r_from_pure_db(db: f64) -> Result<f64> {
    if !(db.is_finite() && db >= 0.0) {
        return Err(Error::domain(format!("pure squeezing level must be >= 0 dB, got {db}")));
    }
    Ok(10f64.powf(db / 10.0).ln() / 2.0)
}

/// Inverse of [`r_from_pure_db`].
pub fn pure_db_from_r(r: f64) -> f64 {
    10.0 * (2.0 * r).exp().log10()
}

/// Single-mode Gaussian state: mean (⟨x⟩, ⟨p⟩) and covariance in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

/// Outcome of the physicality checks on a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physicality {
    pub symmetric: bool,
    pub positive_definite: bool,
    /// det(C) ≥ 1 − tolerance.
    pub uncertainty_ok: bool,
    pub det: f64,
    pub min_eigenvalue: f64,
}

impl Physicality {
    pub fn is_physical(&self) -> bool {
        self.symmetric && self.positive_definite && self.uncertainty_ok
    }
}

impl GaussianState {
    pub fn vacuum() -> Self {
        Self { mean: [0.0; 2], cov: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// Squeezed vacuum with the squeezed axis along `params.theta`, after loss.
    pub fn squeezed(params: &SqueezeParams) -> Self {
        let vs = params.squeezed_variance();
        let va = params.antisqueezed_variance();
        let (s, c) = params.theta.sin_cos();
        let xx = vs * c * c + va * s * s;
        let pp = vs * s * s + va * c * c;
        let xp = (vs - va) * s * c;
        Self { mean: [0.0; 2], cov: [[xx, xp], [xp, pp]] }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.cov[0][0], self.cov[0][1], self.cov[1][0], self.cov[1][1])
    }

    pub fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// Variance of the quadrature measured at LO phase `phi`.
    pub fn variance_at(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.cov[0][0] * c * c + self.cov[1][1] * s * s + 2.0 * self.cov[0][1] * s * c
    }

    pub fn mean_at(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.mean[0] * c + self.mean[1] * s
    }

    pub fn physicality(&self) -> Physicality {
        let symmetric = (self.cov[0][1] - self.cov[1][0]).abs()
            <= PHYSICALITY_TOL * (1.0 + self.cov[0][1].abs());
        let eig = SymmetricEigen::new(self.matrix());
        let min_eigenvalue = eig.eigenvalues.min();
        let det = self.det();
        Physicality {
            symmetric,
            positive_definite: min_eigenvalue > PHYSICALITY_TOL,
            uncertainty_ok: det >= 1.0 - PHYSICALITY_TOL,
            det,
            min_eigenvalue,
        }
    }

    /// Strict check: symmetric, positive definite and det(C) ≥ 1.
    pub fn validate(&self) -> Result<()> {
        let p = self.physicality();
        if !self.mean.iter().chain(self.cov.iter().flatten()).all(|v| v.is_finite()) {
            return Err(Error::domain("state has non-finite entries"));
        }
        if !p.symmetric {
            return Err(Error::domain("covariance is not symmetric"));
        }
        if !p.positive_definite {
            return Err(Error::domain(format!(
                "covariance is not positive definite (min eigenvalue {})",
                p.min_eigenvalue
            )));
        }
        if !p.uncertainty_ok {
            return Err(Error::domain(format!("det(cov) = {} violates det >= 1", p.det)));
        }
        Ok(())
    }

    /// Nearest state on or inside the uncertainty boundary.
    ///
    /// Eigenvalues are floored so that each is ≥ the tolerance, then the
    /// minor eigenvalue is raised until det = 1. Only applied on request.
    pub fn project_to_physical(&self) -> Self {
        let eig = SymmetricEigen::new(self.matrix());
        let (i_min, i_max) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let mut lmax = eig.eigenvalues[i_max].max(PHYSICALITY_TOL);
        let mut lmin = eig.eigenvalues[i_min].max(PHYSICALITY_TOL);
        if lmin * lmax < 1.0 {
            if lmax < 1.0 {
                lmax = 1.0;
            }
            lmin = 1.0 / lmax;
        }
        let mut values = eig.eigenvalues;
        values[i_min] = lmin;
        values[i_max] = lmax;
        let m = eig.eigenvectors * Matrix2::from_diagonal(&values) * eig.eigenvectors.transpose();
        Self { mean: self.mean, cov: [[m[(0, 0)], m[(0, 1)]], [m[(0, 1)], m[(1, 1)]]] }
    }

    /// Draws `n` homodyne samples at LO phase `phi`.
    pub fn sample_at<R: Rng + ?Sized>(&self, phi: f64, n: usize, rng: &mut R) -> Vec<f64> {
        let mu = self.mean_at(phi);
        let sd = self.variance_at(phi).sqrt();
        (0..n).map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

/// Thermal-loss channel: C → (1 − L)C + L·I, mean → √(1 − L)·mean.
pub fn apply_loss(state: &GaussianState, loss: f64) -> Result<GaussianState> {
    check_loss(loss)?;
    let t = 1.0 - loss;
    let st = t.sqrt();
    let c = &state.cov;
    Ok(GaussianState {
        mean: [st * state.mean[0], st * state.mean[1]],
        cov: [[t * c[0][0] + loss, t * c[0][1]], [t * c[1][0], t * c[1][1] + loss]],
    })
}

/// Two-mode Gaussian state ordered (x₁, p₁, x₂, p₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeGaussianState {
    pub mean: [f64; 4],
    pub cov: [[f64; 4]; 4],
}

impl TwoModeGaussianState {
    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.cov[i][j])
    }

    /// EPR state from an x-squeezed mode and a p-squeezed mode mixed on a
    /// balanced beam splitter.
    pub fn epr(vs: f64, va: f64) -> Self {
        let a = (vs + va) / 2.0;
        let b = (va - vs) / 2.0;
        // x₁ = (x_a + x_b)/√2, x₂ = (−x_a + x_b)/√2 with mode a x-squeezed
        // and mode b p-squeezed.
        Self {
            mean: [0.0; 4],
            cov: [
                [a, 0.0, b, 0.0],
                [0.0, a, 0.0, -b],
                [b, 0.0, a, 0.0],
                [0.0, -b, 0.0, a],
            ],
        }
    }

    /// Var(x₁ − x₂) + Var(p₁ + p₂) from the covariance matrix.
    pub fn duan_expression(&self) -> f64 {
        let c = &self.cov;
        c[0][0] + c[2][2] - 2.0 * c[0][2] + c[1][1] + c[3][3] + 2.0 * c[1][3]
    }

    /// Checks symmetry, positive definiteness and C + iΩ ≥ 0.
    pub fn validate(&self) -> Result<()> {
        let m = self.matrix();
        if (m - m.transpose()).abs().max() > PHYSICALITY_TOL {
            return Err(Error::domain("covariance is not symmetric"));
        }
        if SymmetricEigen::new(m).eigenvalues.min() <= PHYSICALITY_TOL {
            return Err(Error::domain("covariance is not positive definite"));
        }
        // C + iΩ is Hermitian; its spectrum equals that of the real block
        // matrix [[C, −Ω], [Ω, C]] (each eigenvalue doubled).
        let mut omega = Matrix4::zeros();
        omega[(0, 1)] = 1.0;
        omega[(1, 0)] = -1.0;
        omega[(2, 3)] = 1.0;
        omega[(3, 2)] = -1.0;
        let block = SMatrix::<f64, 8, 8>::from_fn(|i, j| match (i < 4, j < 4) {
            (true, true) => m[(i, j)],
            (true, false) => -omega[(i, j - 4)],
            (false, true) => omega[(i - 4, j)],
            (false, false) => m[(i - 4, j - 4)],
        });
        let min = SymmetricEigen::new(block).eigenvalues.min();
        if min < -PHYSICALITY_TOL {
            return Err(Error::domain(format!("C + i*Omega has eigenvalue {min} < 0")));
        }
        Ok(())
    }

    /// Draws `n` joint samples of (x₁, p₁, x₂, p₂).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<[f64; 4]>> {
        let chol = self
            .matrix()
            .cholesky()
            .ok_or_else(|| Error::domain("covariance is not positive definite"))?;
        let l = chol.l();
        Ok((0..n)
            .map(|_| {
                let z = nalgebra::Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let v = l * z;
                [
                    self.mean[0] + v[0],
                    self.mean[1] + v[1],
                    self.mean[2] + v[2],
                    self.mean[3] + v[3],
                ]
            })
            .collect())
    }
}

/// Duan inseparability value with split-sample standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuanResult {
    pub value: f64,
    pub stderr: f64,
    pub var_x_diff: f64,
    pub var_p_sum: f64,
    pub entangled: bool,
}

impl DuanResult {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.stderr)
    }
}

/// Minimum samples per quadrature accepted by [`duan_value`].
pub const MIN_DUAN_SAMPLES: usize = 100;

/// Var(x₁ − x₂) + Var(p₁ + p₂); entanglement is witnessed below 4.
pub fn duan_value(x1: &[f64], p1: &[f64], x2: &[f64], p2: &[f64]) -> Result<DuanResult> {
    let n = x1.len();
    if p1.len() != n || x2.len() != n || p2.len() != n {
        return Err(Error::input(format!(
            "quadrature arrays differ in length: {}, {}, {}, {}",
            x1.len(),
            p1.len(),
            x2.len(),
            p2.len()
        )));
    }
    if n < MIN_DUAN_SAMPLES {
        return Err(Error::input(format!("need >= {MIN_DUAN_SAMPLES} samples, got {n}")));
    }
    let xd: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
    let ps: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| a + b).collect();
    let var_x_diff = stats::variance(&xd);
    let var_p_sum = stats::variance(&ps);
    let value = var_x_diff + var_p_sum;
    let parts: Vec<f64> = stats::split_ranges(n, N_SPLITS)
        .into_iter()
        .map(|r| stats::variance(&xd[r.clone()]) + stats::variance(&ps[r]))
        .collect();
    Ok(DuanResult {
        value,
        stderr: stats::split_stderr(&parts),
        var_x_diff,
        var_p_sum,
        entangled: value < 4.0,
    })
}

/// Equivalent single-mode squeezing of a Duan value: 10·log10(4 / duan).
pub fn effective_squeezing_db(duan: f64) -> Result<f64> {
    if !(duan.is_finite() && duan > 0.0) {
        return Err(Error::domain(format!("duan value must be positive, got {duan}")));
    }
    Ok(10.0 * (4.0 / duan).log10())
}
