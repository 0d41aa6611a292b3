//! `nncegar` command-line front end.
//!
//! Exit codes: 0 when the property holds, 1 when it is violated, 2 when the
//! result is unknown or the input could not be processed.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "nncegar", version, about = "Abstraction-refinement verifier for ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a property file or a local robustness query.
    Verify(VerifyArgs),
    /// Print post-activation bounds of the preprocessed network as JSON.
    Bounds(BoundsArgs),
    /// Run the abstraction phase and dump the result.
    Abstract(AbstractArgs),
    /// Run every query of a JSON manifest and print an aggregate report.
    Bench(BenchArgs),
    /// Run a single engine call and answer in the external-engine protocol
    /// (`HOLDS` or `VIOLATED x1,...`, exit 0; `UNKNOWN reason`, exit 2).
    Check(CheckArgs),
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Network in NNet format.
    pub network: PathBuf,
    /// Property JSON file (omit with --robust).
    #[arg(required_unless_present = "robust", conflicts_with = "robust")]
    pub property: Option<PathBuf>,
    /// JSON array with the centre input of a robustness query.
    #[arg(long, requires = "delta")]
    pub robust: Option<PathBuf>,
    /// L-infinity radius of the robustness query.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Expected class; defaults to the network's prediction at the centre.
    #[arg(long)]
    pub target: Option<usize>,
    /// Treat the robustness centre as a raw input and apply the network's
    /// normalization.
    #[arg(long)]
    pub normalize: bool,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads for robustness sub-problems.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct BoundsArgs {
    pub network: PathBuf,
    pub property: PathBuf,
    #[arg(long, value_enum, default_value_t = Bounds::Symbolic)]
    pub bounds: Bounds,
}

#[derive(Args)]
pub struct AbstractArgs {
    pub network: PathBuf,
    pub property: PathBuf,
    /// Directory receiving `abstraction.nnet` and `abstraction.json`.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct BenchArgs {
    /// JSON list of `{network, property | robust: {input, delta, target}, timeout}`.
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct CheckArgs {
    pub network: PathBuf,
    pub property: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Bab)]
    pub engine: Engine,
    #[arg(long, default_value_t = 20)]
    pub max_unstable: usize,
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Engine::Bab)]
    pub engine: Engine,
    /// Command template for `--engine external`, with `{network}` and
    /// `{property}` placeholders.
    #[arg(long, required_if_eq("engine", "external"))]
    pub external_cmd: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_abstraction: bool,
    #[arg(long, value_enum, default_value_t = Bounds::Symbolic)]
    pub bounds: Bounds,
    /// Seconds per query.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Pattern enumeration gives up above this many unstable ReLUs.
    #[arg(long, default_value_t = 20)]
    pub max_unstable: usize,
    /// Print one JSON line per refinement step on stderr.
    #[arg(long)]
    pub trace_refinement: bool,
    /// Single-threaded run with wall-clock fields zeroed in the report.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Pattern,
    Bab,
    External,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Bounds {
    Interval,
    Symbolic,
}

impl From<Bounds> for nncegar::bounds::BoundsMethod {
    fn from(b: Bounds) -> Self {
        match b {
            Bounds::Interval => nncegar::bounds::BoundsMethod::Interval,
            Bounds::Symbolic => nncegar::bounds::BoundsMethod::Symbolic,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(args) => commands::verify(&args),
        Command::Bounds(args) => commands::bounds(&args),
        Command::Abstract(args) => commands::abstract_network(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::Check(args) => commands::check(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
