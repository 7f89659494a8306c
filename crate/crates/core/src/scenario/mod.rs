//! Scenario runner: configuration, parameter overrides, deterministic
//! artifact emission and the run manifest.
//!
//! A run is a pure function of its resolved configuration. Every artifact
//! carries the seed and a SHA-256 hash of the configuration, so two runs
//! with equal configuration produce byte-identical files.

pub mod calibrate;
pub mod epr;
pub mod spectrum;
pub mod tm_squeezing;
pub mod waveforms;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::homodyne::DetectorModel;
use crate::opa::{trajectory_from_pump, GainFit, SqueezerTrajectory};
use crate::pump::{apply_modulator_response, ideal_pump_power, AwgProgram, Calibration, ModulatorResponse, PowerTrace};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TMSQ_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "tmsq-out";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_FRAMES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Spectrum,
    Waveforms,
    TmSqueezing,
    Epr,
    Calibrate,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Spectrum, Scenario::Waveforms, Scenario::TmSqueezing, Scenario::Epr, Scenario::Calibrate];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::Waveforms => "waveforms",
            Scenario::TmSqueezing => "tm_squeezing",
            Scenario::Epr => "epr",
            Scenario::Calibrate => "calibrate",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::input(format!("unknown scenario '{s}'")))
    }
}

/// Parameters of every scenario. Any leaf can be overridden with
/// `--set path.to.key=value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub detector: DetectorModel,
    pub modulator: ModulatorResponse,
    pub spectrum: spectrum::SpectrumParams,
    pub waveforms: waveforms::WaveformParams,
    pub tm_squeezing: tm_squeezing::TmParams,
    pub epr: epr::EprParams,
    pub calibrate: calibrate::CalibrateParams,
}

/// A complete run description. Serialized as the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_frames")]
    pub n_frames: usize,
    #[serde(default)]
    pub calibration_path: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
    /// Flat `dotted.path → value` overrides applied onto `params`.
    #[serde(default)]
    pub overrides: BTreeMap<String, String>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_frames() -> usize {
    DEFAULT_FRAMES
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: DEFAULT_SEED,
            n_frames: DEFAULT_FRAMES,
            calibration_path: None,
            output_dir: None,
            params: Params::default(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `params` with every override applied.
    pub fn resolved_params(&self) -> Result<Params> {
        let mut tree = serde_json::to_value(&self.params)?;
        for (key, raw) in &self.overrides {
            set_path(&mut tree, key, raw)?;
        }
        serde_json::from_value(tree).map_err(|e| Error::input(format!("invalid override: {e}")))
    }

    /// Output directory: explicit, else `$TMSQ_OUT_DIR`, else `tmsq-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::input("n_frames must be at least 2"));
        }
        self.resolved_params()?;
        Ok(())
    }
}

/// Sets `a.b.c` in a JSON tree. The value is parsed as JSON when possible
/// (numbers, booleans, null, arrays) and taken as a string otherwise.
pub fn set_path(tree: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::input(format!("override '{key}': '{}' is not a section", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(Error::input(format!("override '{key}': unknown parameter '{part}'")));
            }
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| Error::input(format!("override '{key}': unknown section '{part}'")))?;
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    Err(Error::input("empty override key"))
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::input(format!("override '{s}' is not of the form key=value")))?;
    if k.trim().is_empty() {
        return Err(Error::input(format!("override '{s}' has an empty key")));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Everything a scenario needs, fully resolved.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub scenario: Scenario,
    pub seed: u64,
    pub n_frames: usize,
    pub params: Params,
    pub calibration: Calibration,
    pub config_hash: String,
}

impl RunContext {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.resolved_params()?;
        let calibration = match &cfg.calibration_path {
            Some(p) => Calibration::load(p)?,
            None => Calibration::default(),
        };
        calibration.validate()?;
        let hashed = serde_json::json!({
            "scenario": cfg.scenario,
            "seed": cfg.seed,
            "n_frames": cfg.n_frames,
            "params": params,
            "calibration": calibration,
        });
        let config_hash = sha256_hex(serde_json::to_string(&hashed)?.as_bytes());
        Ok(Self { scenario: cfg.scenario, seed: cfg.seed, n_frames: cfg.n_frames, params, calibration, config_hash })
    }

    /// Independent seed for the k-th random stream of a run.
    pub fn sub_seed(&self, k: u64) -> u64 {
        sub_seed(self.seed, k)
    }

    /// Comment block placed at the top of every CSV artifact.
    pub fn csv_header(&self, what: &str) -> String {
        format!(
            "tmsq {} {what}\nscenario={} seed={} config_hash={}",
            env!("CARGO_PKG_VERSION"),
            self.scenario,
            self.seed,
            self.config_hash
        )
    }

    /// CSV text with the provenance comment block prepended.
    pub fn csv(&self, what: &str, body: &str) -> String {
        let mut out: String = self.csv_header(what).lines().map(|l| format!("# {l}\n")).collect();
        out.push_str(body);
        out
    }

    /// Pretty JSON with seed and config hash as leading fields.
    pub fn json<T: Serialize>(&self, payload: &T) -> Result<String> {
        let mut v = serde_json::json!({
            "scenario": self.scenario,
            "seed": self.seed,
            "config_hash": self.config_hash,
        });
        let body = serde_json::to_value(payload)?;
        if let (Some(dst), Value::Object(src)) = (v.as_object_mut(), body) {
            dst.extend(src);
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    pub fn gain_fit(&self) -> GainFit {
        GainFit { gain_coeff: self.calibration.gain_coeff, fit_residual: self.calibration.gain_fit_residual.unwrap_or(0.0) }
    }

    /// AWG program → ideal pump → modulator response → squeezer trajectory.
    pub fn pump_chain(&self, prog: &AwgProgram) -> Result<(PowerTrace, PowerTrace, SqueezerTrajectory)> {
        let ideal = ideal_pump_power(prog, &self.calibration)?;
        let shaped = apply_modulator_response(&ideal, &self.params.modulator)?;
        let traj = trajectory_from_pump(&shaped, &self.gain_fit(), self.calibration.loss)?;
        Ok((ideal, shaped, traj))
    }
}

pub fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One module-level invariant evaluated during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// In-memory result of a run: artifacts by file name, plus checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub seed: u64,
    pub config_hash: String,
    pub files: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    /// Scenario-specific headline numbers, also written to the manifest.
    pub summary: Value,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn manifest(&self) -> Result<String> {
        let files: BTreeMap<&str, String> =
            self.files.iter().map(|(k, v)| (k.as_str(), sha256_hex(v.as_bytes()))).collect();
        let m = serde_json::json!({
            "tool": "tmsq",
            "version": env!("CARGO_PKG_VERSION"),
            "scenario": self.scenario,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "status": if self.passed() { "ok" } else { "invariant_failure" },
            "checks": self.checks,
            "summary": self.summary,
            "files": files,
        });
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes every artifact and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, self.manifest()?)?;
        Ok(path)
    }
}

/// Runs a scenario without touching the filesystem (except for reading a
/// calibration file, if configured).
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let ctx = RunContext::from_config(cfg)?;
    let mut files = BTreeMap::new();
    let mut checks = Vec::new();
    let summary = match ctx.scenario {
        Scenario::Spectrum => spectrum::run(&ctx, &mut files, &mut checks)?,
        Scenario::Waveforms => waveforms::run(&ctx, &mut files, &mut checks)?,
        Scenario::TmSqueezing => tm_squeezing::run(&ctx, &mut files, &mut checks)?,
        Scenario::Epr => epr::run(&ctx, &mut files, &mut checks)?,
        Scenario::Calibrate => calibrate::run(&ctx, &mut files, &mut checks)?,
    };
    Ok(RunOutcome { scenario: ctx.scenario, seed: ctx.seed, config_hash: ctx.config_hash, files, checks, summary })
}

/// Structured error report printed by the CLI.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}
