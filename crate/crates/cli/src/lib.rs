//! Command-line experiments: threshold design, ROC curves, P_D sweeps,
//! asymptotic theory tables and a bundled selftest.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::Parser;
use mbrao::optimizer::ThresholdFile;

pub mod commands;
mod error;
pub mod selftest;
pub mod spec;

pub use commands::Outcome;
pub use error::{CliError, CliResult};
pub use spec::{BitDepth, Command, ExperimentSpec};

#[derive(Debug, Parser)]
#[command(name = "mbrao", version, about = "Multi-bit quantized Rao detection experiments")]
pub struct Cli {
    /// Experiment to run; overrides `command` in the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bit depths, e.g. `2` or `1,2,3,inf`.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// False-alarm rate(s), comma separated.
    #[arg(long)]
    pub pfa: Option<String>,
    /// Trials per hypothesis.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Threshold file (its first line carries q); may be repeated.
    #[arg(long)]
    pub thresholds: Vec<PathBuf>,
    /// SNR grid in dB for pd-snr, comma separated.
    #[arg(long = "snr-grid", allow_hyphen_values = true)]
    pub snr_grid: Option<String>,
}

fn read(path: &PathBuf) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Config file with command-line overrides applied.
pub fn build_spec(cli: &Cli) -> CliResult<(Command, ExperimentSpec)> {
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::parse(&read(path)?)?,
        None => ExperimentSpec::default(),
    };
    if let Some(q) = &cli.q {
        spec.set("q", q)?;
    }
    if let Some(v) = cli.snr_db {
        spec.snr_db = v;
    }
    if let Some(p) = &cli.pfa {
        spec.set("pfa", p)?;
    }
    if let Some(n) = cli.trials {
        spec.trials_h0 = n;
        spec.trials_h1 = n;
    }
    if let Some(s) = cli.seed {
        spec.seed = Some(s);
    }
    if let Some(out) = &cli.out {
        spec.out = Some(out.clone());
    }
    if let Some(grid) = &cli.snr_grid {
        spec.set("snr_grid_db", grid)?;
    }
    let mut from_files = std::collections::HashSet::new();
    for path in &cli.thresholds {
        let file = ThresholdFile::parse(&read(path)?)?;
        let bits = file.thresholds.bits();
        if !from_files.insert(bits) {
            return Err(CliError::Validation(format!(
                "more than one threshold file for q = {bits}"
            )));
        }
        spec.thresholds.insert(bits, file.thresholds);
    }
    if let Some(c) = cli.command {
        spec.command = Some(c);
    }
    let command = spec
        .command
        .ok_or_else(|| CliError::Validation("no command given".into()))?;
    Ok((command, spec))
}

/// Runs the command, writes its artifact and prints notes. Returns the
/// deferred error, if any, after the artifact is on disk.
pub fn run(cli: &Cli) -> CliResult<()> {
    let (command, spec) = build_spec(cli)?;
    let outcome = commands::dispatch(command, &spec)?;
    let stderr = io::stderr();
    let mut err = stderr.lock();
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match &spec.out {
        Some(path) => {
            fs::write(path, &outcome.artifact).map_err(|e| CliError::io(path, e))?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for line in &outcome.summary {
                let _ = writeln!(out, "{line}");
            }
            let _ = writeln!(out, "wrote {}", path.display());
        }
        None => {
            for line in &outcome.summary {
                let _ = writeln!(err, "{line}");
            }
            io::stdout()
                .write_all(outcome.artifact.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    match outcome.deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
