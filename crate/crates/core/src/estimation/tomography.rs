//! Maximum-likelihood single-mode Gaussian tomography from homodyne samples
//! taken at several LO phases.
//!
//! Samples at phase φ are N(μ(φ), V(φ)) with μ = ⟨x⟩cosφ + ⟨p⟩sinφ and
//! V = C_xx cos²φ + C_pp sin²φ + 2C_xp sinφ cosφ. The likelihood depends on
//! each group only through (n, sample mean, sum of squared deviations).
//! Weighted moment matching gives a closed-form start, which Newton
//! iterations on the exact log-likelihood then refine. The search is over
//! physical states: when the unconstrained optimum violates det(C) ≥ 1 the
//! maximum lies on the boundary det(C) = 1 and is found there.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::AddAssign;

use super::ellipse::{wigner_ellipse, wrap_half_turn_deg, Ellipse};
use crate::error::{Error, Result};
use crate::quantum::{GaussianState, Physicality};
use crate::stats::{self, N_SPLITS};

pub const MIN_GROUP_SAMPLES: usize = 100;
pub const MIN_PHASES: usize = 3;
/// Smallest accepted arc (mod π) covered by the LO phases.
pub const MIN_PHASE_SPAN: f64 = PI / 2.0;

const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGroup {
    /// LO phase, radians.
    pub phase: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyInput {
    pub groups: Vec<PhaseGroup>,
}

/// Arc (mod π) spanned by a set of angles: π minus the widest gap.
pub fn phase_span(phases: &[f64]) -> f64 {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(PI)).collect();
    p.sort_by(f64::total_cmp);
    p.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if p.len() < 2 {
        return 0.0;
    }
    let mut gap = p[0] + PI - p[p.len() - 1];
    for w in p.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    PI - gap
}

impl TomographyInput {
    /// Groups quadrature values by their (exact) phase tag, in order of
    /// first appearance.
    pub fn from_tagged(phases: &[f64], values: &[f64]) -> Result<Self> {
        if phases.len() != values.len() {
            return Err(Error::input("phase tags and values differ in length"));
        }
        let mut groups: Vec<PhaseGroup> = Vec::new();
        for (&ph, &v) in phases.iter().zip(values) {
            match groups.iter_mut().find(|g| g.phase == ph) {
                Some(g) => g.samples.push(v),
                None => groups.push(PhaseGroup { phase: ph, samples: vec![v] }),
            }
        }
        Ok(Self { groups })
    }

    pub fn n_samples(&self) -> usize {
        self.groups.iter().map(|g| g.samples.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.groups {
            if !g.phase.is_finite() || g.samples.iter().any(|x| !x.is_finite()) {
                return Err(Error::input("non-finite phase or sample"));
            }
            if g.samples.len() < MIN_GROUP_SAMPLES {
                return Err(Error::input(format!(
                    "phase {:.4} rad has {} samples, need >= {MIN_GROUP_SAMPLES}",
                    g.phase,
                    g.samples.len()
                )));
            }
        }
        let phases: Vec<f64> = self.groups.iter().map(|g| g.phase).collect();
        let mut distinct = phases.iter().map(|p| p.rem_euclid(PI)).collect::<Vec<_>>();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let span = phase_span(&phases);
        if distinct.len() < MIN_PHASES || span < MIN_PHASE_SPAN - 1e-9 {
            return Err(Error::IllConditioned(format!(
                "{} distinct phases spanning {:.1} deg; need >= {MIN_PHASES} spanning >= 90 deg",
                distinct.len(),
                span.to_degrees()
            )));
        }
        Ok(())
    }

    /// The same samples re-split into `k` contiguous parts per group.
    fn splits(&self, k: usize) -> Vec<Vec<GroupStats>> {
        (0..k)
            .map(|j| {
                self.groups
                    .iter()
                    .map(|g| {
                        let r = &stats::split_ranges(g.samples.len(), k)[j];
                        GroupStats::new(g.phase, &g.samples[r.clone()])
                    })
                    .collect()
            })
            .collect()
    }
}

/// Sufficient statistics of one phase group.
#[derive(Debug, Clone, Copy)]
struct GroupStats {
    n: f64,
    mean: f64,
    /// Σ (x − mean)².
    ss: f64,
    /// (cos φ, sin φ).
    a: [f64; 2],
    /// (cos²φ, sin²φ, 2 sinφ cosφ).
    b: [f64; 3],
}

impl GroupStats {
    fn new(phase: f64, xs: &[f64]) -> Self {
        let mean = stats::mean(xs);
        let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let (s, c) = phase.sin_cos();
        Self { n: xs.len() as f64, mean, ss, a: [c, s], b: [c * c, s * s, 2.0 * s * c] }
    }
}

type V5 = SVector<f64, 5>;
type M5 = SMatrix<f64, 5, 5>;

/// Parameter vector (⟨x⟩, ⟨p⟩, C_xx, C_pp, C_xp).
fn to_state(t: &V5) -> GaussianState {
    GaussianState { mean: [t[0], t[1]], cov: [[t[2], t[4]], [t[4], t[3]]] }
}

#[cfg(test)]
fn from_state(s: &GaussianState) -> V5 {
    V5::new(s.mean[0], s.mean[1], s.cov[0][0], s.cov[1][1], s.cov[0][1])
}

/// Log-likelihood (constants dropped), gradient and Hessian. `None` when
/// some group variance is non-positive.
fn loglik(groups: &[GroupStats], t: &V5) -> Option<(f64, V5, M5)> {
    let mut l = 0.0;
    let mut g = V5::zeros();
    let mut h = M5::zeros();
    for gs in groups {
        let mu = gs.a[0] * t[0] + gs.a[1] * t[1];
        let v = gs.b[0] * t[2] + gs.b[1] * t[3] + gs.b[2] * t[4];
        if !(v > 0.0) {
            return None;
        }
        let dm = gs.mean - mu;
        let d = gs.ss + gs.n * dm * dm;
        l += -0.5 * gs.n * v.ln() - d / (2.0 * v);
        let a = SVector::<f64, 2>::from(gs.a);
        let b = SVector::<f64, 3>::from(gs.b);
        let gm = a * (gs.n * dm / v);
        let gc = b * (-gs.n / (2.0 * v) + d / (2.0 * v * v));
        g.fixed_rows_mut::<2>(0).add_assign(&gm);
        g.fixed_rows_mut::<3>(2).add_assign(&gc);
        let hmm = a * a.transpose() * (-gs.n / v);
        let hmc = a * b.transpose() * (-gs.n * dm / (v * v));
        let hcc = b * b.transpose() * (gs.n / (2.0 * v * v) - d / (v * v * v));
        h.fixed_view_mut::<2, 2>(0, 0).add_assign(&hmm);
        h.fixed_view_mut::<2, 3>(0, 2).add_assign(&hmc);
        h.fixed_view_mut::<3, 2>(2, 0).add_assign(&hmc.transpose());
        h.fixed_view_mut::<3, 3>(2, 2).add_assign(&hcc);
    }
    Some((l, g, h))
}

/// Weighted least-squares moment matching.
fn moment_start(groups: &[GroupStats]) -> Result<V5> {
    let mut am = SMatrix::<f64, 2, 2>::zeros();
    let mut bm = SVector::<f64, 2>::zeros();
    let mut ac = SMatrix::<f64, 3, 3>::zeros();
    let mut bc = SVector::<f64, 3>::zeros();
    for g in groups {
        let a = SVector::<f64, 2>::from(g.a);
        let b = SVector::<f64, 3>::from(g.b);
        am += a * a.transpose() * g.n;
        bm += a * (g.n * g.mean);
        ac += b * b.transpose() * g.n;
        bc += b * g.ss;
    }
    let ill = || Error::IllConditioned("phase set does not determine the covariance".into());
    let m = am.lu().solve(&bm).ok_or_else(ill)?;
    let c = ac.lu().solve(&bc).ok_or_else(ill)?;
    Ok(V5::new(m[0], m[1], c[0], c[1], c[2]))
}

/// Generic damped Newton ascent. `eval` returns (ℓ, ∇ℓ, ∇²ℓ) or `None`
/// outside the domain.
fn newton<const D: usize>(
    start: SVector<f64, D>,
    eval: impl Fn(&SVector<f64, D>) -> Option<(f64, SVector<f64, D>, SMatrix<f64, D, D>)>,
) -> SVector<f64, D> {
    let mut x = start;
    let Some(mut cur) = eval(&x) else { return x };
    for _ in 0..MAX_NEWTON {
        let (l, g, h) = &cur;
        let neg = -h;
        let step = match neg.cholesky() {
            Some(ch) => ch.solve(g),
            // not locally concave: scaled gradient step
            None => g / (neg.diagonal().abs().max().max(1.0)),
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x + step * t;
            if let Some(next) = eval(&trial) {
                if next.0 >= *l {
                    accepted = Some((trial, next));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, next)) = accepted else { break };
        let moved = (trial - x).amax();
        x = trial;
        cur = next;
        if moved <= 1e-13 * (1.0 + x.amax()) {
            break;
        }
    }
    x
}

/// Boundary parametrization (⟨x⟩, ⟨p⟩, ln u, w) ↦ C = [[u, w], [w, (1 + w²)/u]],
/// which has det(C) = 1 identically.
fn boundary_to_full(q: &SVector<f64, 4>) -> V5 {
    let u = q[2].exp();
    V5::new(q[0], q[1], u, (1.0 + q[3] * q[3]) / u, q[3])
}

fn boundary_loglik(
    groups: &[GroupStats],
    q: &SVector<f64, 4>,
) -> Option<(f64, SVector<f64, 4>, SMatrix<f64, 4, 4>)> {
    let t = boundary_to_full(q);
    let (l, g, h) = loglik(groups, &t)?;
    let (u, w) = (t[2], q[3]);
    let cpp = t[3];
    // Jacobian ∂t/∂q
    let mut j = SMatrix::<f64, 5, 4>::zeros();
    j[(0, 0)] = 1.0;
    j[(1, 1)] = 1.0;
    j[(2, 2)] = u;
    j[(3, 2)] = -cpp;
    j[(3, 3)] = 2.0 * w / u;
    j[(4, 3)] = 1.0;
    let gq = j.transpose() * g;
    let mut hq = j.transpose() * h * j;
    // curvature of the map itself
    hq[(2, 2)] += g[2] * u + g[3] * cpp;
    hq[(2, 3)] += -g[3] * 2.0 * w / u;
    hq[(3, 2)] += -g[3] * 2.0 * w / u;
    hq[(3, 3)] += g[3] * 2.0 / u;
    Some((l, gq, hq))
}

struct Fit {
    state: GaussianState,
    /// √diag of the inverse observed information at the free optimum.
    fisher: [f64; 5],
    unconstrained: GaussianState,
    constrained: bool,
    log_likelihood: f64,
}

fn fit_groups(groups: &[GroupStats]) -> Result<Fit> {
    let start = moment_start(groups)?;
    let mut t = start;
    // Moment matching can give a non-positive variance at some phase;
    // fall back to the isotropic covariance with the same mean.
    if loglik(groups, &t).is_none() {
        let v = groups.iter().map(|g| g.ss).sum::<f64>() / groups.iter().map(|g| g.n).sum::<f64>();
        t = V5::new(t[0], t[1], v, v, 0.0);
    }
    let free = newton(t, |x| loglik(groups, x));
    let unconstrained = to_state(&free);
    let fisher = loglik(groups, &free)
        .and_then(|(_, _, h)| (-h).try_inverse())
        .map_or([f64::NAN; 5], |c| std::array::from_fn(|i| c[(i, i)].max(0.0).sqrt()));
    let p = unconstrained.physicality();
    if p.positive_definite && p.det >= 1.0 {
        let l = loglik(groups, &free).map_or(f64::NEG_INFINITY, |r| r.0);
        return Ok(Fit { state: unconstrained, fisher, unconstrained, constrained: false, log_likelihood: l });
    }
    // The likelihood is maximized over physical states on det(C) = 1.
    let seed = unconstrained.project_to_physical();
    let q0 = SVector::<f64, 4>::new(seed.mean[0], seed.mean[1], seed.cov[0][0].ln(), seed.cov[0][1]);
    let q = newton(q0, |x| boundary_loglik(groups, x));
    let full = boundary_to_full(&q);
    let l = loglik(groups, &full).map_or(f64::NEG_INFINITY, |r| r.0);
    Ok(Fit { state: to_state(&full), fisher, unconstrained, constrained: true, log_likelihood: l })
}

/// Split-sample standard errors of the reported quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyStderr {
    pub mean: [f64; 2],
    /// (C_xx, C_pp, C_xp).
    pub cov: [f64; 3],
    /// √C_xx.
    pub delta_x: f64,
    /// √C_pp.
    pub delta_p: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub state: GaussianState,
    pub ellipse: Ellipse,
    pub stderr: TomographyStderr,
    /// Asymptotic errors of (⟨x⟩, ⟨p⟩, C_xx, C_pp, C_xp) from the observed
    /// information of the unconstrained likelihood.
    pub fisher_stderr: [f64; 5],
    pub physicality: Physicality,
    /// True when the unconstrained optimum was unphysical and the estimate
    /// lies on det(C) = 1.
    pub on_boundary: bool,
    /// Maximizer of the likelihood without the det(C) ≥ 1 constraint.
    pub unconstrained: GaussianState,
    pub log_likelihood: f64,
    pub n_samples: usize,
    pub phases: Vec<f64>,
}

impl TomographyResult {
    pub fn delta_x(&self) -> f64 {
        self.state.cov[0][0].sqrt()
    }

    pub fn delta_p(&self) -> f64 {
        self.state.cov[1][1].sqrt()
    }
}

/// Fits a physical Gaussian state by maximum likelihood and reports the
/// 1/√e Wigner ellipse; errors come from refitting 10 disjoint subsets.
pub fn ml_gaussian_tomography(input: &TomographyInput) -> Result<TomographyResult> {
    input.validate()?;
    let all: Vec<GroupStats> = input.groups.iter().map(|g| GroupStats::new(g.phase, &g.samples)).collect();
    let fit = fit_groups(&all)?;
    let ellipse = wigner_ellipse(&fit.state)?;
    let parts: Vec<(GaussianState, Ellipse)> = input
        .splits(N_SPLITS)
        .iter()
        .map(|g| {
            let f = fit_groups(g)?;
            Ok((f.state, wigner_ellipse(&f.state)?))
        })
        .collect::<Result<_>>()?;
    let se = |f: &dyn Fn(&(GaussianState, Ellipse)) -> f64| {
        stats::split_stderr(&parts.iter().map(f).collect::<Vec<_>>())
    };
    let stderr = TomographyStderr {
        mean: [se(&|p| p.0.mean[0]), se(&|p| p.0.mean[1])],
        cov: [se(&|p| p.0.cov[0][0]), se(&|p| p.0.cov[1][1]), se(&|p| p.0.cov[0][1])],
        delta_x: se(&|p| p.0.cov[0][0].sqrt()),
        delta_p: se(&|p| p.0.cov[1][1].sqrt()),
        semi_major: se(&|p| p.1.semi_major),
        semi_minor: se(&|p| p.1.semi_minor),
        angle_deg: se(&|p| wrap_half_turn_deg(p.1.angle_deg - ellipse.angle_deg)),
    };
    Ok(TomographyResult {
        state: fit.state,
        ellipse,
        stderr,
        fisher_stderr: fit.fisher,
        physicality: fit.state.physicality(),
        on_boundary: fit.constrained,
        unconstrained: fit.unconstrained,
        log_likelihood: fit.log_likelihood,
        n_samples: input.n_samples(),
        phases: input.groups.iter().map(|g| g.phase).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::SqueezeParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_input(state: &GaussianState, n_phases: usize, n: usize, seed: u64) -> TomographyInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = (0..n_phases)
            .map(|k| {
                let phase = (k as f64 * 15.0).to_radians();
                PhaseGroup { phase, samples: state.sample_at(phase, n, &mut rng) }
            })
            .collect();
        TomographyInput { groups }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let input = sample_input(&GaussianState::squeezed(&SqueezeParams::new(0.3, 0.4, 0.2).unwrap()), 12, 200, 3);
        let gs: Vec<GroupStats> = input.groups.iter().map(|g| GroupStats::new(g.phase, &g.samples)).collect();
        let t = V5::new(0.1, -0.05, 0.9, 1.2, 0.1);
        let (_, g, h) = loglik(&gs, &t).unwrap();
        for i in 0..5 {
            let mut e = V5::zeros();
            e[i] = 1e-6;
            let (lp, gp, _) = loglik(&gs, &(t + e)).unwrap();
            let (lm, gm, _) = loglik(&gs, &(t - e)).unwrap();
            assert!(((lp - lm) / 2e-6 - g[i]).abs() < 1e-4 * (1.0 + g[i].abs()));
            let col = (gp - gm) / 2e-6;
            for j in 0..5 {
                assert!((col[j] - h[(j, i)]).abs() < 1e-3 * (1.0 + h[(j, i)].abs()), "{i} {j}");
            }
        }
    }

    #[test]
    fn boundary_derivatives() {
        let input = sample_input(&GaussianState::vacuum(), 12, 200, 4);
        let gs: Vec<GroupStats> = input.groups.iter().map(|g| GroupStats::new(g.phase, &g.samples)).collect();
        let q = SVector::<f64, 4>::new(0.02, -0.01, 0.1, 0.05);
        let (_, g, h) = boundary_loglik(&gs, &q).unwrap();
        for i in 0..4 {
            let mut e = SVector::<f64, 4>::zeros();
            e[i] = 1e-6;
            let (lp, gp, _) = boundary_loglik(&gs, &(q + e)).unwrap();
            let (lm, gm, _) = boundary_loglik(&gs, &(q - e)).unwrap();
            assert!(((lp - lm) / 2e-6 - g[i]).abs() < 1e-4 * (1.0 + g[i].abs()));
            let col = (gp - gm) / 2e-6;
            for j in 0..4 {
                assert!((col[j] - h[(j, i)]).abs() < 1e-3 * (1.0 + h[(j, i)].abs()), "{i} {j}");
            }
        }
        let t = boundary_to_full(&q);
        assert!((to_state(&t).det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn squeezed_state_recovered() {
        let truth = GaussianState { mean: [0.0; 2], cov: [[0.6208, 0.0], [0.0, 1.7079]] };
        let res = ml_gaussian_tomography(&sample_input(&truth, 12, 5000, 9)).unwrap();
        let se = res.fisher_stderr;
        assert!((res.state.cov[0][0] - 0.6208).abs() < 3.0 * se[2]);
        assert!((res.state.cov[1][1] - 1.7079).abs() < 3.0 * se[3]);
        assert!(res.state.cov[0][1].abs() < 3.0 * se[4]);
        // split errors scatter around the asymptotic ones
        for (split, fisher) in res.stderr.cov.iter().zip(&se[2..]) {
            assert!(split / fisher > 0.4 && split / fisher < 2.0, "{split} vs {fisher}");
        }
        assert!(res.ellipse.angle_deg.abs() < 3.0 * res.stderr.angle_deg.max(0.3));
        assert!(!res.on_boundary);
        assert_eq!(res.n_samples, 60000);
    }

    #[test]
    fn vacuum_recovered_and_physical() {
        for seed in 0..6 {
            let res = ml_gaussian_tomography(&sample_input(&GaussianState::vacuum(), 12, 5000, seed)).unwrap();
            assert!(res.physicality.is_physical(), "{:?}", res.physicality);
            for (v, s) in [(res.state.cov[0][0], res.stderr.cov[0]), (res.state.cov[1][1], res.stderr.cov[1])] {
                assert!((v - 1.0).abs() < 3.0 * s.max(0.005), "{v} ± {s}");
            }
            assert!(res.state.mean[0].abs() < 3.0 * res.stderr.mean[0]);
        }
    }

    #[test]
    fn boundary_fit_beats_projection() {
        // a sample set whose free optimum is sub-vacuum in both quadratures
        let shrunk = GaussianState { mean: [0.0; 2], cov: [[0.97, 0.0], [0.0, 0.97]] };
        let input = sample_input(&shrunk, 12, 3000, 5);
        let res = ml_gaussian_tomography(&input).unwrap();
        assert!(res.on_boundary);
        assert!((res.state.det() - 1.0).abs() < 1e-9);
        let gs: Vec<GroupStats> = input.groups.iter().map(|g| GroupStats::new(g.phase, &g.samples)).collect();
        let proj = res.unconstrained.project_to_physical();
        let l_proj = loglik(&gs, &from_state(&proj)).unwrap().0;
        assert!(res.log_likelihood >= l_proj - 1e-9);
    }

    #[test]
    fn narrow_phase_span_is_ill_conditioned() {
        let v = GaussianState::vacuum();
        let mut input = sample_input(&v, 12, 200, 1);
        input.groups.truncate(5); // 0..60 deg
        assert!(matches!(ml_gaussian_tomography(&input), Err(Error::IllConditioned(_))));
        let mut few = sample_input(&v, 12, 200, 1);
        few.groups = vec![few.groups[0].clone(), few.groups[6].clone()];
        assert!(matches!(ml_gaussian_tomography(&few), Err(Error::IllConditioned(_))));
        let mut small = sample_input(&v, 12, 200, 1);
        small.groups[3].samples.truncate(50);
        assert!(matches!(ml_gaussian_tomography(&small), Err(Error::Input(_))));
    }

    #[test]
    fn span_wraps_mod_pi() {
        assert!((phase_span(&[0.0, PI / 2.0]) - PI / 2.0).abs() < 1e-12);
        let d = |x: f64| x.to_radians();
        assert!((phase_span(&[d(170.0), d(10.0), d(40.0)]) - d(50.0)).abs() < 1e-9);
        assert_eq!(phase_span(&[0.0, PI]), 0.0);
    }

    #[test]
    fn from_tagged_groups() {
        let input = TomographyInput::from_tagged(&[0.0, 1.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(input.groups.len(), 2);
        assert_eq!(input.groups[0].samples, vec![1.0, 3.0]);
        assert!(TomographyInput::from_tagged(&[0.0], &[]).is_err());
    }
}
