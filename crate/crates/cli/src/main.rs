//! `emt`: derive, canonicalize, compare and check energy-momentum tensors.
//!
//! Exit status: 0 success, equal or all checks passing; 1 a nonzero
//! difference or a failed check; 2 a usage, input or parse error; 3 an
//! internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emt_core::hilbert::Stage;
use emt_core::verify::props::Mode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_DIFFERENT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "emt", version, about = "Energy-momentum tensors by Noether's theorem and by metric variation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Canonicalize a Lagrangian (.lag), an expression (.expr) or a JSON expression.
    Canon {
        file: PathBuf,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Derive an energy-momentum tensor.
    #[command(subcommand)]
    Derive(Derive),
    /// Canonical difference `A - B`; exit 1 when nonzero.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check properties of a tensor; exit 1 when any fails.
    Check {
        /// Declarations supplying fields and the gauge transformation.
        file: PathBuf,
        #[arg(long)]
        emt: PathBuf,
        /// Comma-separated: symmetric, traceless, gauge_invariant, conserved.
        #[arg(long, value_delimiter = ',', required = true)]
        properties: Vec<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Symbolic)]
        mode: ModeArg,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Compare two expressions on random exact configurations; exit 1 when unequal.
    OracleCompare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        /// Declarations supplying the fields of JSON and .expr inputs.
        #[arg(long)]
        lag: Option<PathBuf>,
    },
    /// Structured comparison of the curvature-squared tensor against its reference.
    Report {
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum Derive {
    /// Translation current with the free indices `^ga ^rh`.
    Noether {
        file: PathBuf,
        /// Extra declarations with `delta` rules replacing the canonical ones.
        #[arg(long)]
        delta: Option<PathBuf>,
        #[command(flatten)]
        derive: DeriveArgs,
    },
    /// Metric variation of the minimally promoted Lagrangian, restricted to flat space.
    Hilbert {
        file: PathBuf,
        /// Write the named intermediate stage as JSON; repeatable.
        #[arg(long = "emit-stage", value_parser = parse_stage)]
        emit_stage: Vec<Stage>,
        /// Directory for stage dumps; the current directory by default.
        #[arg(long)]
        stage_dir: Option<PathBuf>,
        /// Keep every promoted term and apply the full product rule.
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        derive: DeriveArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct DeriveArgs {
    /// Parameter values, e.g. `--set A=1/4,B=-1,C=1/4`.
    #[arg(long = "set", value_delimiter = ',')]
    pub set: Vec<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Spacetime dimension: a positive integer, or `D` for symbolic.
    #[arg(long, default_value = "4")]
    pub dim: String,
    /// Declarations supplying the fields of JSON and .expr inputs.
    #[arg(long)]
    pub lag: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub degree: u32,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Symbolic,
    Numeric,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Symbolic => Mode::Symbolic,
            ModeArg::Numeric => Mode::Numeric,
        }
    }
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse::<Stage>().map_err(|e| e.to_string())
}

fn configure_threads() -> Result<(), String> {
    let n = match std::env::var("EMT_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| format!("EMT_THREADS must be a non-negative integer, got {v:?}"))?,
        Err(_) => return Ok(()),
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let code = match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code)
}
