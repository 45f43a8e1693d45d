//! `zeno`: runs reward-steered noise optimization benchmarks from a TOML
//! run file and writes JSON traces and CSV tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error. On failure
//! a JSON object `{"error": {"kind", "field", "message"}}` is printed to
//! stdout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration{}: {message}", field.as_ref().map(|f| format!(" (`{f}`)")).unwrap_or_default())]
    Config { field: Option<String>, message: String },
    #[error("run failed: {0}")]
    Runtime(String),
}

impl From<zeno::Error> for CliError {
    fn from(e: zeno::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            field: Option<&'a str>,
            message: String,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let body = match self {
            CliError::Config { field, message } => Body {
                kind: "config",
                field: field.as_deref(),
                message: message.clone(),
            },
            CliError::Runtime(message) => Body {
                kind: "runtime",
                field: None,
                message: message.clone(),
            },
        };
        serde_json::to_string(&Envelope { error: body }).expect("error serializes")
    }
}

#[derive(Debug, Parser)]
#[command(name = "zeno", version, about = "Reward-steered noise optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output` in the run file).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Added to every seed of the run file.
    #[arg(long, default_value_t = 0)]
    pub seed_offset: u64,
    /// Worker threads; 0 or unset uses one per core.
    #[arg(long, env = "ZENO_DEFAULT_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepKind {
    Scaling,
    Estimators,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize every seed and write one trace per seed plus a summary.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Also write the per-iteration chain states of each seed.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Target vs. ZeNO vs. finite-difference Langevin mode probabilities.
    Table1 {
        #[command(flatten)]
        common: Common,
    },
    /// Mean best reward over a grid of particle / iteration counts or estimators.
    Sweep {
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
}

fn execute(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Optimize {
            common,
            dump_trajectories,
        } => run::optimize(&common, dump_trajectories),
        Command::Table1 { common } => run::table1(&common),
        Command::Sweep { kind, common } => run::sweep(&common, kind),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("zeno: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
