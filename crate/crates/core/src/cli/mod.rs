//! Batch front door: `herzlab run <config.json>` and `herzlab report <dir>`.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{
    ChainSection, ExperimentConfig, ExperimentKind, HerzSection, OperatorName, ScreenSection, SquareSection,
    SuiteSection,
};
pub use report::{report, ReportSummary};
pub use run::{run, Outcome, RunOptions, RunSummary, Status, Table};

/// Every experiment passed.
pub const EXIT_OK: u8 = 0;
/// At least one experiment failed its pass rule.
pub const EXIT_FAIL: u8 = 1;
/// Malformed config, unreadable input or unwritable output.
pub const EXIT_CONFIG: u8 = 2;
/// A precondition screen failed and probe mode was off.
pub const EXIT_PRECONDITION: u8 = 3;

/// Environment variable overriding the config seed.
pub const SEED_ENV: &str = "HERZLAB_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("report error: {0}")]
    Report(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Run-directory manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub grid_sha256: String,
    pub seed: u64,
    /// `"config"` or the override variable's name.
    pub seed_source: String,
    pub probe: bool,
    pub exit_code: u8,
    pub experiments: Vec<ManifestEntry>,
    /// File name to SHA-256 for every output listed by an experiment plus the summary tables.
    pub files: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: ExperimentKind,
    pub status: Status,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub name: String,
    pub role: TableRole,
}

/// What a data file holds, so `report` knows how to reshape it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableRole {
    Points,
    Ratios,
    Chain,
    Decomposition,
    Kernels,
}

pub const MANIFEST: &str = "manifest.json";
pub const EXPERIMENTS_CSV: &str = "experiments.csv";
pub const FIT_SUMMARY_CSV: &str = "fit_summary.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const REPORT_LONG_CSV: &str = "report_long.csv";

/// Floats in CSVs: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Parser)]
#[command(name = "herzlab", version, about = "Inequality experiments on weighted variable-exponent Herz spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiments listed in a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Record out-of-window and screen-failing experiments instead of refusing them.
        #[arg(long)]
        probe: bool,
    },
    /// Summarize a run directory.
    Report { dir: PathBuf },
}

/// Entry point of the `herzlab` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let code = match cli.command {
        Command::Run { config, jobs, probe } => {
            let seed_override = match std::env::var(SEED_ENV) {
                Ok(s) => match s.trim().parse::<u64>() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        eprintln!("herzlab: {SEED_ENV} must be an unsigned integer, got {s:?}");
                        return ExitCode::from(EXIT_CONFIG);
                    }
                },
                Err(_) => None,
            };
            match run(&config, &RunOptions { jobs, probe, seed_override }) {
                Ok(summary) => {
                    for o in &summary.outcomes {
                        println!("{:<28} {:<8} {}", o.id, o.status.as_str(), o.note);
                    }
                    summary.exit_code
                }
                Err(e) => {
                    eprintln!("herzlab: {e}");
                    EXIT_CONFIG
                }
            }
        }
        Command::Report { dir } => match report(&dir) {
            Ok(summary) => {
                print!("{}", summary.table);
                EXIT_OK
            }
            Err(e) => {
                eprintln!("herzlab: {e}");
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(code)
}
