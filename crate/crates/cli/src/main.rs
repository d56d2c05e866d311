//! `otto`: steady states, spectra, cycles and parameter sweeps of the
//! feedback-controlled optomechanical Otto engine.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Formats, RunConfig};
use output::Writer;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "otto",
    version,
    about = "Polariton Otto engine in a feedback-controlled optomechanical cavity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated output formats: csv, json, matrix.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary correlations, populations and stability at one detuning.
    Steady(Common),
    /// Normal-mode frequencies over a detuning scan.
    Polariton(Common),
    /// One engine cycle: trajectory and energy ledger.
    Cycle(Common),
    /// Two-parameter grid of cycle evaluations.
    Sweep(Common),
    /// Validate the configuration and report the time-scale hierarchy.
    Check(Common),
}

type Action = fn(&RunConfig, &mut Writer, Formats) -> Result<serde_json::Value, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common, action): (&str, &Common, Action) = match &cli.command {
        Command::Steady(c) => ("steady", c, commands::steady),
        Command::Polariton(c) => ("polariton", c, commands::polariton),
        Command::Cycle(c) => ("cycle", c, commands::cycle),
        Command::Sweep(c) => ("sweep", c, commands::sweep),
        Command::Check(c) => ("check", c, commands::check),
    };
    let cfg = RunConfig::from_path(&common.config)?;
    let formats = match &common.format {
        Some(list) => Formats::parse("--format", list)?,
        None => cfg.formats,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(ConfigError {
                field: "--threads".into(),
                message: "must be at least 1".into(),
            }
            .into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let dir = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let mut out = Writer::new(&dir)?;
    let summary = action(&cfg, &mut out, formats)?;
    if name == "check" {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("JSON values always serialize")
        );
    }
    for path in out.written() {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
