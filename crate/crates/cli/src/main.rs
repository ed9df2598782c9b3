//! `picturelab` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or validation, 3 resource, 4 truncation or
//! numerical failure. Errors are printed to stderr as one JSON object.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use picturelab::tol::Tolerances;
use serde::Serialize;

pub const TAIL_ENV: &str = "PICTURELAB_TAIL_TOL";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "picturelab",
    version,
    about = "Phase-randomized optical states: build, diagnose, test"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long = "out", value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// RNG seed, recorded in every output.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a state and summarize it.
    State {
        #[command(flatten)]
        state: config::StateArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Negativity and separability verdict across the natural cut.
    Negativity {
        #[command(flatten)]
        state: config::StateArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Displaced-parity CHSH scan of a two-mode state.
    BellScan {
        #[command(flatten)]
        state: config::StateArgs,
        #[command(flatten)]
        scan: commands::ScanArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Success probability of repeated Bell experiments versus pairs per experiment.
    Protocol {
        #[command(flatten)]
        protocol: commands::ProtocolArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Two qubits entangled with a four-level register.
    QubitDemo {
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Measurement statistics of paired decompositions of the same operator.
    PictureCheck {
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl From<picturelab::Error> for Failure {
    fn from(e: picturelab::Error) -> Self {
        use picturelab::Error::*;
        let code = match e {
            Resource(_) => 3,
            Truncation(_) | Numerical(_) => 4,
            Dimension(_) | Shape(_) | Argument(_) | Validation(_) | Config(_) => 2,
        };
        Failure {
            code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl Failure {
    pub fn io(message: String) -> Self {
        Failure {
            code: 3,
            kind: "io".into(),
            message,
        }
    }
}

fn tolerances() -> Result<Tolerances, Failure> {
    match std::env::var(TAIL_ENV) {
        Err(_) => Ok(Tolerances::default()),
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t < 1.0 => Ok(Tolerances::with_tail(t)),
            _ => Err(Failure {
                code: 2,
                kind: "config".into(),
                message: format!("{TAIL_ENV}={v:?} must be a number in (0, 1)"),
            }),
        },
    }
}

fn report(f: &Failure) {
    let body = serde_json::json!({"error": f.kind, "message": f.message, "exit_code": f.code});
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure {
                code: 2,
                kind: "usage".into(),
                message: e.render().to_string().trim().to_string(),
            };
            report(&f);
            return ExitCode::from(f.code);
        }
    };
    let result = tolerances().and_then(|tol| commands::run(cli.command, &tol));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}
