//! `eulerfield`: batch experiments on the randomized Euler product model.
//!
//! Every run writes `<out-dir>/<tag>.csv` and a JSON sidecar
//! `<out-dir>/<tag>.json` with the config, version, wall time and the
//! outcome of each in-run assertion. Exit codes: 0 all assertions pass,
//! 2 configuration error, 3 capacity error, 4 assertion failure, 1 other.

mod commands;
mod config;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "eulerfield",
    version,
    about = "Randomized Euler product experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// `key = value` file supplying flags; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for CSV and JSON output.
    #[arg(
        long,
        global = true,
        env = "EULERFIELD_OUT_DIR",
        default_value = ".",
        value_name = "DIR"
    )]
    pub out_dir: PathBuf,
    /// File stem of the outputs; defaults to the subcommand name.
    #[arg(long, global = true)]
    pub tag: Option<String>,
    /// Worker threads; defaults to the available parallelism. Results do
    /// not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sieve primes up to e^L and summarize the dyadic scales.
    Sieve(commands::SieveArgs),
    /// Scale covariances: analytic backends against Monte Carlo.
    VerifyCovariance(commands::CovarianceArgs),
    /// Bessel-form cumulant generating function against Monte Carlo.
    VerifyCgf(commands::CgfArgs),
    /// Moments under the tilted measure against their analytic values.
    VerifyTilt(commands::TiltArgs),
    /// Distribution of the maximum of the prime field or a tree.
    Max(commands::MaxArgs),
    /// Tree maximum medians over a depth sweep and the subleading fit.
    BrwMax(commands::BrwMaxArgs),
    /// Ballot probabilities by dynamic programming and Monte Carlo.
    Ballot(commands::BallotArgs),
    /// Exceedance counts, moments and the Markov/Paley-Zygmund sandwich.
    Exceedances(commands::ExceedArgs),
    /// Local oscillation frequencies against the chaining bound.
    Oscillation(commands::OscillationArgs),
    /// Paired scale increments against the matched Gaussian.
    CompareGaussian(commands::GaussianArgs),
    /// Two-point probabilities of the lower-bound event by branching point.
    Joint(commands::JointArgs),
}

/// Which field a command samples.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Prime,
    Brw,
}

/// Backend for analytic prime sums.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumBackend {
    Exact,
    Integral,
}

/// Failure of a run, mapped onto the exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Capacity(String),
    Other(String),
}

impl From<eulerfield::Error> for Failure {
    fn from(e: eulerfield::Error) -> Self {
        use eulerfield::Error as E;
        match e {
            ref c if c.is_capacity() => Failure::Capacity(c.to_string()),
            E::Io(_) | E::Csv(_) | E::Json(_) | E::Format(_) => Failure::Other(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

const SUBCOMMANDS: [&str; 11] = [
    "sieve",
    "verify-covariance",
    "verify-cgf",
    "verify-tilt",
    "max",
    "brw-max",
    "ballot",
    "exceedances",
    "oscillation",
    "compare-gaussian",
    "joint",
];

fn parse(args: Vec<String>) -> Result<Cli, clap::Error> {
    let m = Cli::command().try_get_matches_from(args)?;
    Cli::from_arg_matches(&m)
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(w) = cli.global.workers {
        if w == 0 {
            eprintln!("error: invalid argument `workers`: must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Sieve(a) => commands::sieve(g, a),
        Command::VerifyCovariance(a) => commands::verify_covariance(g, a),
        Command::VerifyCgf(a) => commands::verify_cgf(g, a),
        Command::VerifyTilt(a) => commands::verify_tilt(g, a),
        Command::Max(a) => commands::max(g, a),
        Command::BrwMax(a) => commands::brw_max(g, a),
        Command::Ballot(a) => commands::ballot(g, a),
        Command::Exceedances(a) => commands::exceedances(g, a),
        Command::Oscillation(a) => commands::oscillation(g, a),
        Command::CompareGaussian(a) => commands::compare_gaussian(g, a),
        Command::Joint(a) => commands::joint(g, a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Capacity(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
