use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use desolder_sim::scenario::{parse_scenario, ConfigError, Scenario};
use desolder_sim::sim::{run_batch, run_scenario, SimError};
use desolder_sim::trace::write_trace;

const EXIT_FAULT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Robotic desoldering simulator.
///
/// Exit status: 0 success, 1 the run ended in a fault or hit its duration
/// cap, 2 invalid scenario or arguments, 3 file I/O failure.
/// `DESOLDER_SIM_DT_US` overrides the integration step (microseconds).
#[derive(Parser)]
#[command(name = "desolder-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its per-step trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run independent trials and write aggregate rates.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check a scenario document without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(_) | SimError::NoTrials => Failure::config(e),
            other => Self { code: EXIT_FAULT, message: other.to_string() },
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let mut s = parse_scenario(&text).map_err(|e: ConfigError| Failure::config(format!("{}: {e}", path.display())))?;
    s.apply_env_overrides().map_err(Failure::config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run { scenario, out, report, seed } => {
            let s = load(&scenario, seed)?;
            let (run, trace) = run_scenario(&s)?;
            write_trace(&trace, &out).map_err(|e| Failure { code: EXIT_IO, message: e.to_string() })?;
            if let Some(path) = report {
                write_json(&path, &run)?;
            }
            println!(
                "{}: {} at t={:.3}s{}",
                run.label,
                run.final_phase,
                run.end_time,
                run.time_to_removal.map(|t| format!(", removal {t:.3}s after heating onset")).unwrap_or_default()
            );
            Ok(if run.completed { 0 } else { EXIT_FAULT })
        }
        Command::Batch { scenario, trials, out, seed, jobs } => {
            let s = load(&scenario, seed)?;
            let batch = run_batch(&s, trials, jobs)?;
            write_json(&out, &batch)?;
            println!(
                "{}: {} trials, desolder rate {:.4}, grasp rate {:.4}",
                batch.label, batch.trials, batch.desolder_rate, batch.grasp_rate
            );
            Ok(0)
        }
        Command::Validate { scenario } => {
            let s = load(&scenario, None)?;
            println!("{}: ok", s.label);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
