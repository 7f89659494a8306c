use std::path::Path;
use std::process::{Command, Output};

fn tmsq(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tmsq"));
    cmd.args(args).env_remove("TMSQ_OUT_DIR");
    if let Some(d) = env_out {
        cmd.env("TMSQ_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr).lines().last().unwrap_or_default().to_string();
    let v: serde_json::Value = serde_json::from_str(&line).expect("structured error on stderr");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical_and_carry_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = tmsq(&["run", "spectrum", "--seed", "1", "--frames", "200", "--out", d.to_str().unwrap()], None);
        assert!(out.status.code().is_some_and(|c| c == 0 || c == 1), "{out:?}");
    }
    let (fa, fb) = (read_dir(&a), read_dir(&b));
    assert_eq!(fa, fb);
    assert!(fa.iter().any(|(n, _)| n == "manifest.json"));
    for (name, body) in &fa {
        let text = String::from_utf8(body.clone()).unwrap();
        if name.ends_with(".csv") {
            assert!(text.lines().take(3).any(|l| l.starts_with('#') && l.contains("seed=1") && l.contains("config_hash=")), "{name}");
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["seed"], 1, "{name}");
            assert!(v["config_hash"].as_str().is_some_and(|h| h.len() == 64), "{name}");
        }
    }
}

#[test]
fn manifest_lists_file_hashes_and_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmsq(&["run", "calibrate", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["scenario"], "calibrate");
    assert!(m["version"].is_string());
    let files = m["files"].as_object().unwrap();
    assert!(files.contains_key("calibration.json") && files.contains_key("gain_curve.csv"));
    for (_, h) in files {
        assert_eq!(h.as_str().unwrap().len(), 64);
    }
}

#[test]
fn calibration_output_feeds_later_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cal_dir = tmp.path().join("cal");
    let out = tmsq(&["run", "calibrate", "--seed", "3", "--out", cal_dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let cal = cal_dir.join("calibration.json");
    let epr_dir = tmp.path().join("epr");
    let out = tmsq(
        &["run", "epr", "--frames", "300", "--calibration", cal.to_str().unwrap(), "--out", epr_dir.to_str().unwrap()],
        None,
    );
    assert!(out.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(epr_dir.join("epr_report.json").exists());
}

#[test]
fn usage_errors_exit_two_with_structured_json() {
    let out = tmsq(&["run", "fig9"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "input");
    let out = tmsq(&["run", "epr", "--set", "epr.no_such_key=1"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = tmsq(&["run", "epr", "--set", "missing_equals"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = tmsq(&["run"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = tmsq(&["run", "epr", "--frames", "1"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_nonzero_with_structured_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmsq(&["run", "epr", "--calibration", "/definitely/missing.json", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "io");
    // 0.5 V exceeds the 160 mV ceiling
    let out = tmsq(&["run", "epr", "--set", "epr.voltage=0.5", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "domain");
    // 3.5 dB needs more pump than the ceiling allows
    let out = tmsq(
        &[
            "run",
            "tm_squeezing",
            "--set",
            r#"tm_squeezing.slots=[{"kind":"squeezed","squeezing_db":3.5,"quadrature":"x_squeezed"}]"#,
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "infeasible");
}

#[test]
fn config_file_env_dir_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"scenario": "calibrate", "seed": 5, "overrides": {"calibrate.gain_noise": "0.001"}}"#).unwrap();
    let env_dir = tmp.path().join("env");
    let out = tmsq(&["run", "calibrate", "--config", cfg.to_str().unwrap(), "--seed", "6"], Some(&env_dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(env_dir.join("calibrate_report.json")).unwrap()).unwrap();
    assert_eq!(rep["seed"], 6);

    let printed = tmsq(&["config", "tm_squeezing"], None);
    assert_eq!(printed.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(v["scenario"], "tm_squeezing");
    assert_eq!(v["params"]["tm_squeezing"]["n_phases"], 12);
}
