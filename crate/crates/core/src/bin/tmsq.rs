use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use tmsq::scenario::{self, parse_override, Scenario, ScenarioConfig, OUT_DIR_ENV};
use tmsq::Error;

#[derive(Parser)]
#[command(name = "tmsq", version, about = "Time-multiplexed squeezed light digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts plus manifest.json.
    Run {
        /// spectrum | waveforms | tm_squeezing | epr | calibrate
        scenario: String,
        /// JSON config file; flags below take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Frames per LO setting.
        #[arg(long)]
        frames: Option<usize>,
        /// Output directory.
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        /// Calibration JSON, e.g. one written by the calibrate scenario.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Parameter override, `section.key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the fully populated default config of a scenario.
    Config { scenario: String },
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

fn build_config(
    scenario: &str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    frames: Option<usize>,
    out: Option<PathBuf>,
    calibration: Option<PathBuf>,
    overrides: Vec<String>,
) -> Result<ScenarioConfig, Error> {
    let scenario: Scenario = scenario.parse()?;
    let mut cfg = match config {
        Some(path) => ScenarioConfig::load(&path)?,
        None => ScenarioConfig::new(scenario),
    };
    cfg.scenario = scenario;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = frames {
        cfg.n_frames = n;
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    if calibration.is_some() {
        cfg.calibration_path = calibration;
    }
    for o in overrides {
        let (k, v) = parse_override(&o)?;
        cfg.overrides.insert(k, v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Config { scenario } => {
            let s: Scenario = scenario.parse().map_err(Failure::Usage)?;
            let json = serde_json::to_string_pretty(&ScenarioConfig::new(s)).map_err(|e| Failure::Runtime(e.into()))?;
            println!("{json}");
            Ok(true)
        }
        Command::Run { scenario, config, seed, frames, out, calibration, overrides } => {
            let cfg = build_config(&scenario, config, seed, frames, out, calibration, overrides).map_err(Failure::Usage)?;
            let outcome = scenario::run(&cfg).map_err(|e| match e {
                Error::Input(_) | Error::Format(_) => Failure::Usage(e),
                _ => Failure::Runtime(e),
            })?;
            let dir = cfg.output_dir();
            let manifest = outcome.write(&dir).map_err(Failure::Runtime)?;
            for c in &outcome.checks {
                eprintln!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            println!("{}", manifest.display());
            Ok(outcome.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("{}", scenario::error_json(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("{}", scenario::error_json(&e));
            ExitCode::from(1)
        }
    }
}
