use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use tmsq_ffi::*;

fn last_error() -> String {
    let p = tmsq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn variance_and_errors() {
    let mut v = 0.0;
    assert_eq!(unsafe { tmsq_variance_at_phase(0.0, 0.0, 0.0, 0.3, &mut v) }, TmsqStatus::Ok);
    assert_eq!(v, 1.0);
    assert!(tmsq_last_error().is_null());
    assert_eq!(unsafe { tmsq_variance_at_phase(0.3, 0.0, 1.5, 0.0, &mut v) }, TmsqStatus::Domain);
    assert!(last_error().contains("loss"));
    assert_eq!(unsafe { tmsq_variance_at_phase(0.3, 0.0, 0.1, 0.0, ptr::null_mut()) }, TmsqStatus::NullPointer);
}

#[test]
fn loss_inversion_reference_point() {
    let mut out = TmsqPureSqueezing::default();
    let st = unsafe { tmsq_estimate_pure_squeezing(-2.0708616, 0.0, 2.3244520, 0.0, &mut out) };
    assert_eq!(st, TmsqStatus::Ok);
    assert!((out.pure_db - 2.71).abs() < 1e-3 && (out.loss - 0.183).abs() < 1e-4);
    let st = unsafe { tmsq_estimate_pure_squeezing(-6.0, 0.0, 2.0, 0.0, &mut out) };
    assert_eq!(st, TmsqStatus::InfeasiblePair);
    let st = unsafe { tmsq_estimate_pure_squeezing(1.0, 0.0, 2.0, 0.0, &mut out) };
    assert_eq!(st, TmsqStatus::NoSqueezing);
}

#[test]
fn duan_and_effective_db() {
    // x1 = −x2 and p1 = p2 exactly: both variances vanish
    let a: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 - 50.0) / 10.0).collect();
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    let mut d = TmsqDuan::default();
    let st = unsafe { tmsq_duan(a.as_ptr(), a.as_ptr(), neg.as_ptr(), neg.as_ptr(), a.len(), &mut d) };
    assert_eq!(st, TmsqStatus::Ok);
    assert!((d.var_p_sum).abs() < 1e-12 && d.var_x_diff > 0.0);
    assert_eq!(unsafe { tmsq_duan(ptr::null(), a.as_ptr(), a.as_ptr(), a.as_ptr(), 5, &mut d) }, TmsqStatus::NullPointer);
    let mut db = 0.0;
    assert_eq!(unsafe { tmsq_effective_squeezing_db(2.79, &mut db) }, TmsqStatus::Ok);
    assert!((db - 1.565).abs() < 1e-3);
    assert_ne!(unsafe { tmsq_effective_squeezing_db(-1.0, &mut db) }, TmsqStatus::Ok);
}

#[test]
fn tomography_handle() {
    let h = tmsq_tomography_new();
    // deterministic samples with unit spread at three phases
    let s: Vec<f64> = (0..400).map(|i| ((i as f64 + 0.5) / 400.0 * 2.0 - 1.0) * 3f64.sqrt()).collect();
    for k in 0..3 {
        let st = unsafe { tmsq_tomography_add_samples(h, k as f64 * std::f64::consts::PI / 3.0, s.as_ptr(), s.len()) };
        assert_eq!(st, TmsqStatus::Ok);
    }
    let mut out = TmsqTomographyResult::default();
    assert_eq!(unsafe { tmsq_tomography_fit(h, &mut out) }, TmsqStatus::Ok);
    assert!((out.cov_xx - 1.0).abs() < 0.01 && (out.cov_pp - 1.0).abs() < 0.01 && out.cov_xp.abs() < 0.01);
    assert!(out.det >= 1.0 - 1e-9);
    unsafe { tmsq_tomography_free(h) };
    let empty = tmsq_tomography_new();
    assert_ne!(unsafe { tmsq_tomography_fit(empty, &mut out) }, TmsqStatus::Ok);
    unsafe {
        tmsq_tomography_free(empty);
        tmsq_tomography_free(ptr::null_mut());
    }
}

#[test]
fn config_and_run() {
    let bad = CString::new("fig9").unwrap();
    assert!(unsafe { tmsq_config_new(bad.as_ptr()) }.is_null());
    assert!(last_error().contains("unknown scenario"));

    let name = CString::new("calibrate").unwrap();
    let cfg = unsafe { tmsq_config_new(name.as_ptr()) };
    assert!(!cfg.is_null());
    let (k, v) = (CString::new("calibrate.gain_noise").unwrap(), CString::new("0.002").unwrap());
    assert_eq!(unsafe { tmsq_config_set(cfg, k.as_ptr(), v.as_ptr()) }, TmsqStatus::Ok);
    let (k2, v2) = (CString::new("calibrate.nope").unwrap(), CString::new("1").unwrap());
    assert_eq!(unsafe { tmsq_config_set(cfg, k2.as_ptr(), v2.as_ptr()) }, TmsqStatus::InvalidInput);
    assert_eq!(unsafe { tmsq_config_set_seed(cfg, 9) }, TmsqStatus::Ok);

    let json = unsafe { tmsq_config_to_json(cfg) };
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { tmsq_string_free(json) };
    assert!(text.contains("\"seed\": 9"));
    let again = CString::new(text).unwrap();
    let cfg2 = unsafe { tmsq_config_from_json(again.as_ptr()) };
    assert!(!cfg2.is_null());

    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut manifest = ptr::null_mut();
    assert_eq!(unsafe { tmsq_run(cfg, out.as_ptr(), &mut manifest) }, TmsqStatus::Ok);
    let m: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(manifest) }.to_str().unwrap()).unwrap();
    unsafe { tmsq_string_free(manifest) };
    assert_eq!(m["seed"], 9);
    assert_eq!(m["status"], "ok");
    assert!(dir.path().join("calibration.json").exists());
    unsafe {
        tmsq_config_free(cfg);
        tmsq_config_free(cfg2);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have(cmd: &str) -> bool {
    Command::new(cmd).arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("tmsq.h")).unwrap();
    for f in ["tmsq_run", "tmsq_tomography_fit", "tmsq_estimate_pure_squeezing", "TMSQ_STATUS_INFEASIBLE_PAIR"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let lib = target_dir().join("libtmsq_ffi.a");
    if !have("cc") || !lib.exists() {
        eprintln!("skipping C link check: cc or {} unavailable", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "tmsq.h"
int main(void) {
    double v = 0.0;
    if (tmsq_variance_at_phase(0.312, 0.0, 0.183, 0.0, &v) != TMSQ_STATUS_OK) return 1;
    TmsqPureSqueezing est;
    if (tmsq_estimate_pure_squeezing(-6.0, 0.0, 2.0, 0.0, &est) != TMSQ_STATUS_INFEASIBLE_PAIR) return 2;
    if (tmsq_last_error() == NULL) return 3;
    TmsqConfig *cfg = tmsq_config_new("nope");
    if (cfg != NULL) return 4;
    printf("%.6f %s\n", v, tmsq_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C smoke test exited with {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("0.620"), "{text}");
}
