//! C ABI for the tmsq simulator.
//!
//! Conventions:
//! - Every fallible function returns a [`TmsqStatus`]; results go through
//!   out-pointers. On failure a message is available from
//!   [`tmsq_last_error`] on the calling thread.
//! - Opaque handles are created by `*_new` functions and released by the
//!   matching `*_free`. Passing NULL to `*_free` is a no-op.
//! - Strings returned as `char *` are owned by the caller and must be
//!   released with [`tmsq_string_free`].
//! - Panics never cross the boundary; they surface as `TMSQ_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tmsq::dsp::estimate_pure_squeezing_and_loss;
use tmsq::estimation::{ml_gaussian_tomography, PhaseGroup, TomographyInput};
use tmsq::quantum::{duan_value, effective_squeezing_db, variance_at_phase, SqueezeParams};
use tmsq::scenario::{self, Scenario, ScenarioConfig};
use tmsq::stats::Estimate;
use tmsq::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmsqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Domain = 3,
    Infeasible = 4,
    InfeasiblePair = 5,
    NoSqueezing = 6,
    IllConditioned = 7,
    Io = 8,
    Format = 9,
    Utf8 = 10,
    /// A scenario ran but at least one invariant check failed.
    InvariantFailure = 11,
    Panic = 12,
}

impl From<&Error> for TmsqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => TmsqStatus::Domain,
            Error::Input(_) => TmsqStatus::InvalidInput,
            Error::Infeasible { .. } => TmsqStatus::Infeasible,
            Error::InfeasiblePair(_) => TmsqStatus::InfeasiblePair,
            Error::NoSqueezing(_) => TmsqStatus::NoSqueezing,
            Error::IllConditioned(_) => TmsqStatus::IllConditioned,
            Error::Io(_) => TmsqStatus::Io,
            Error::Format(_) => TmsqStatus::Format,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(TmsqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(TmsqStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TmsqStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, records any error, converts panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TmsqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TmsqStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            TmsqStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(TmsqStatus::Utf8, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(std::ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next tmsq call on the same thread.
#[no_mangle]
pub extern "C" fn tmsq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tmsq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn tmsq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Quadrature variance at LO phase `phi` for squeezing r, angle theta and
/// loss, in shot-noise units.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn tmsq_variance_at_phase(r: f64, theta: f64, loss: f64, phi: f64, out: *mut f64) -> TmsqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = SqueezeParams::new(r, theta, loss)?;
        if !phi.is_finite() {
            return Err(Error::Input("phi must be finite".into()).into());
        }
        *out = variance_at_phase(&p, phi);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TmsqPureSqueezing {
    pub pure_db: f64,
    pub pure_db_stderr: f64,
    pub loss: f64,
    pub loss_stderr: f64,
    pub r: f64,
    pub low_confidence: bool,
}

/// Pure squeezing and loss from measured squeezing / anti-squeezing levels
/// (dB relative to shot noise) and their standard errors.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tmsq_estimate_pure_squeezing(
    squeezing_db: f64,
    squeezing_stderr: f64,
    antisqueezing_db: f64,
    antisqueezing_stderr: f64,
    out: *mut TmsqPureSqueezing,
) -> TmsqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let e = estimate_pure_squeezing_and_loss(
            Estimate::new(squeezing_db, squeezing_stderr),
            Estimate::new(antisqueezing_db, antisqueezing_stderr),
        )?;
        *out = TmsqPureSqueezing {
            pure_db: e.pure_db.value,
            pure_db_stderr: e.pure_db.stderr,
            loss: e.loss.value,
            loss_stderr: e.loss.stderr,
            r: e.r,
            low_confidence: e.low_confidence,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TmsqDuan {
    pub value: f64,
    pub std_error: f64,
    pub var_x_diff: f64,
    pub var_p_sum: f64,
    pub entangled: bool,
}

/// Var(x1 − x2) + Var(p1 + p2) from paired quadrature samples.
///
/// # Safety
/// Each array must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn tmsq_duan(
    x1: *const f64,
    p1: *const f64,
    x2: *const f64,
    p2: *const f64,
    n: usize,
    out: *mut TmsqDuan,
) -> TmsqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let d = duan_value(slice(x1, n, "x1")?, slice(p1, n, "p1")?, slice(x2, n, "x2")?, slice(p2, n, "p2")?)?;
        *out = TmsqDuan {
            value: d.value,
            std_error: d.stderr,
            var_x_diff: d.var_x_diff,
            var_p_sum: d.var_p_sum,
            entangled: d.entangled,
        };
        Ok(())
    })
}

/// 10·log10(4 / duan).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tmsq_effective_squeezing_db(duan: f64, out: *mut f64) -> TmsqStatus {
    guard(|| {
        *out_ref(out, "out")? = effective_squeezing_db(duan)?;
        Ok(())
    })
}

/// Accumulates homodyne samples per LO phase for Gaussian tomography.
pub struct TmsqTomography {
    groups: Vec<PhaseGroup>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TmsqTomographyResult {
    pub mean_x: f64,
    pub mean_p: f64,
    pub cov_xx: f64,
    pub cov_pp: f64,
    pub cov_xp: f64,
    pub det: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Orientation of the squeezed axis, degrees in (−90, 90].
    pub angle_deg: f64,
    /// Asymptotic standard errors of mean_x, mean_p, cov_xx, cov_pp, cov_xp.
    pub std_errors: [f64; 5],
    /// The fit was constrained to det(cov) = 1.
    pub on_boundary: bool,
}

#[no_mangle]
pub extern "C" fn tmsq_tomography_new() -> *mut TmsqTomography {
    Box::into_raw(Box::new(TmsqTomography { groups: Vec::new() }))
}

/// # Safety
/// `h` must be NULL or a handle from [`tmsq_tomography_new`].
#[no_mangle]
pub unsafe extern "C" fn tmsq_tomography_free(h: *mut TmsqTomography) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Appends `n` quadrature samples measured at LO phase `phase` (rad).
///
/// # Safety
/// `h` must be a live handle and `samples` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn tmsq_tomography_add_samples(
    h: *mut TmsqTomography,
    phase: f64,
    samples: *const f64,
    n: usize,
) -> TmsqStatus {
    guard(|| {
        let h = out_ref(h, "handle")?;
        let s = slice(samples, n, "samples")?;
        match h.groups.iter_mut().find(|g| g.phase == phase) {
            Some(g) => g.samples.extend_from_slice(s),
            None => h.groups.push(PhaseGroup { phase, samples: s.to_vec() }),
        }
        Ok(())
    })
}

/// Maximum-likelihood Gaussian fit of the accumulated samples.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tmsq_tomography_fit(h: *const TmsqTomography, out: *mut TmsqTomographyResult) -> TmsqStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let out = out_ref(out, "out")?;
        let r = ml_gaussian_tomography(&TomographyInput { groups: h.groups.clone() })?;
        let c = r.state.cov;
        *out = TmsqTomographyResult {
            mean_x: r.state.mean[0],
            mean_p: r.state.mean[1],
            cov_xx: c[0][0],
            cov_pp: c[1][1],
            cov_xp: c[0][1],
            det: r.state.det(),
            semi_major: r.ellipse.semi_major,
            semi_minor: r.ellipse.semi_minor,
            angle_deg: r.ellipse.angle_deg,
            std_errors: r.fisher_stderr,
            on_boundary: r.on_boundary,
        };
        Ok(())
    })
}

/// A scenario configuration.
pub struct TmsqConfig {
    cfg: ScenarioConfig,
}

/// Default configuration for a scenario name ("spectrum", "waveforms",
/// "tm_squeezing", "epr", "calibrate"). Returns NULL on error.
///
/// # Safety
/// `scenario` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_new(scenario: *const c_char) -> *mut TmsqConfig {
    let mut handle = std::ptr::null_mut();
    guard(|| {
        let s: Scenario = string(scenario, "scenario")?.parse()?;
        handle = Box::into_raw(Box::new(TmsqConfig { cfg: ScenarioConfig::new(s) }));
        Ok(())
    });
    handle
}

/// Configuration parsed from a JSON document. Returns NULL on error.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_from_json(json: *const c_char) -> *mut TmsqConfig {
    let mut handle = std::ptr::null_mut();
    guard(|| {
        let cfg = ScenarioConfig::from_json(&string(json, "json")?)?;
        handle = Box::into_raw(Box::new(TmsqConfig { cfg }));
        Ok(())
    });
    handle
}

/// # Safety
/// `h` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_free(h: *mut TmsqConfig) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_set_seed(h: *mut TmsqConfig, seed: u64) -> TmsqStatus {
    guard(|| {
        out_ref(h, "handle")?.cfg.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_set_frames(h: *mut TmsqConfig, n_frames: usize) -> TmsqStatus {
    guard(|| {
        out_ref(h, "handle")?.cfg.n_frames = n_frames;
        Ok(())
    })
}

/// Adds a `section.key` = `value` override; the value is validated.
///
/// # Safety
/// `h` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_set(h: *mut TmsqConfig, key: *const c_char, value: *const c_char) -> TmsqStatus {
    guard(|| {
        let h = out_ref(h, "handle")?;
        let (k, v) = (string(key, "key")?, string(value, "value")?);
        let mut trial = h.cfg.clone();
        trial.overrides.insert(k, v);
        trial.resolved_params()?;
        h.cfg = trial;
        Ok(())
    })
}

/// Configuration as JSON, or NULL on error. Free with [`tmsq_string_free`].
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tmsq_config_to_json(h: *const TmsqConfig) -> *mut c_char {
    let mut out = std::ptr::null_mut();
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        out = into_c_string(serde_json::to_string_pretty(&h.cfg).map_err(Error::from)?);
        Ok(())
    });
    out
}

/// Runs a scenario and writes its artifacts and manifest.json into
/// `out_dir` (NULL: the configured or default directory). When `manifest`
/// is non-NULL it receives the manifest JSON, to be freed with
/// [`tmsq_string_free`]. Returns `TMSQ_STATUS_INVARIANT_FAILURE` when the
/// run completed but a check failed.
///
/// # Safety
/// `h` must be a live handle; `out_dir` NULL or NUL-terminated; `manifest`
/// NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tmsq_run(h: *const TmsqConfig, out_dir: *const c_char, manifest: *mut *mut c_char) -> TmsqStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let dir = if out_dir.is_null() { h.cfg.output_dir() } else { PathBuf::from(string(out_dir, "out_dir")?) };
        let outcome = scenario::run(&h.cfg)?;
        outcome.write(&dir)?;
        if let Some(m) = manifest.as_mut() {
            *m = into_c_string(outcome.manifest()?);
        }
        if outcome.passed() {
            Ok(())
        } else {
            let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            Err(Fail(TmsqStatus::InvariantFailure, format!("failed checks: {}", failed.join(", "))))
        }
    })
}
