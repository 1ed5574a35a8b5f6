//! `l2mbqc` command-line front-end.
//!
//! Exit codes: 0 success, 1 verification or certification failure,
//! 2 usage or input error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "l2mbqc",
    version,
    about = "Correlation-box computation, GHZ compilation and noisy-gate reliability"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-input success table of a gate built from a correlation resource.
    Gate(GateArgs),
    /// Thresholds β_k, ν(k-MAJ)/2^k and their gap for odd k up to kmax.
    Thresholds(ThresholdArgs),
    /// Compile a truth table into a non-adaptive GHZ program.
    Compile(CompileArgs),
    /// Check a GHZ program against a truth table.
    Verify(VerifyArgs),
    /// Contextuality certificate of an L2 program for a target function.
    Inequality(InequalityArgs),
    /// Build and evaluate a multiplexed reliable circuit.
    Reliable(ReliableArgs),
    /// Evaluate reliable circuits over a parameter grid.
    Sweep(SweepArgs),
    /// Run one subcommand from a JSON configuration file.
    Run(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file. Relative paths are taken under $L2MBQC_OUT_DIR when set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateName {
    And,
    Maj,
    Xnand,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resource {
    Chsh,
    NoncontextualQuarter,
    Ghz,
}

#[derive(Args, Debug)]
pub struct GateArgs {
    #[arg(value_enum)]
    pub name: GateName,
    #[arg(long, value_enum)]
    pub resource: Resource,
    /// Majority size (maj only).
    #[arg(long)]
    pub k: Option<usize>,
    /// GHZ noise ε (ghz resource only).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    /// Largest odd k, at most 41.
    #[arg(long, default_value_t = 41)]
    pub kmax: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    /// Truth-table file (`n=<arity>` header, hex table).
    #[arg(long = "fn", value_name = "FILE")]
    pub function: PathBuf,
    /// Emit a qubit for every non-empty subset, including zero increments.
    #[arg(long)]
    pub pad: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// GHZ program file written by `compile`.
    #[arg(long, value_name = "FILE")]
    pub program: PathBuf,
    #[arg(long = "fn", value_name = "FILE")]
    pub function: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct InequalityArgs {
    #[arg(long = "fn", value_name = "FILE")]
    pub function: PathBuf,
    /// `chsh-and`, `noncontextual-and`, or an L2 or GHZ program file.
    #[arg(long)]
    pub program: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComputeResource {
    Chsh,
    Noncontextual,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct FormulaSource {
    /// NAND formula file (s-expression).
    #[arg(long, value_name = "FILE")]
    pub formula: Option<PathBuf>,
    /// Balanced NAND tree of this depth.
    #[arg(long, value_name = "DEPTH")]
    pub tree: Option<u32>,
}

#[derive(Args, Debug)]
pub struct ReliableArgs {
    #[command(flatten)]
    pub source: FormulaSource,
    /// Bundle width W.
    #[arg(long, default_value_t = 81)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Restore rounds r.
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
    /// Resource behind the XNAND compute gate.
    #[arg(long, value_enum, default_value_t = ComputeResource::Chsh)]
    pub compute: ComputeResource,
    /// Use a uniformly μ-noisy XNAND instead.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Use a uniformly ε-noisy k-MAJ for restores (required when k ≠ 3).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Monte Carlo trials per input; 0 runs the analytic model only.
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    /// Master seed for wiring and sampling; required when trials > 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: FormulaSource,
    #[arg(long, value_delimiter = ',', default_value = "81")]
    pub width: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub rounds: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "chsh")]
    pub compute: Vec<ComputeResource>,
    /// Restore gate errors; omitted means CHSH-derived 3-MAJ.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
}

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

/// Errors that map to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

pub fn dispatch(command: Command) -> Result<Status, UsageError> {
    match command {
        Command::Gate(a) => commands::gate(a),
        Command::Thresholds(a) => commands::thresholds(a),
        Command::Compile(a) => commands::compile(a),
        Command::Verify(a) => commands::verify(a),
        Command::Inequality(a) => commands::inequality(a),
        Command::Reliable(a) => commands::reliable(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Run(a) => config::run(&a.config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
