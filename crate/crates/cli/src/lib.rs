//! `fbmshe` command line: parses a flat config, runs one study and writes
//! versioned artifacts into the output directory.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical
//! failure (embedding or quadrature).

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod bands;
mod commands;

pub const THREADS_ENV: &str = "FBMSHE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fbmshe", version, about = "Convergence experiments for the stochastic heat equation driven by fBm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write it to trajectory.csv.
    Simulate(CommonArgs),
    /// Strong error against the number of time steps.
    ConvergeTime(CommonArgs),
    /// Strong error against the number of Galerkin modes.
    ConvergeSpace(CommonArgs),
    /// Strong error against the number of noise modes.
    ConvergeTrunc(CommonArgs),
    /// Temporal Hölder exponent of the discrete solution.
    Hoelder(CommonArgs),
    /// Quadrature audit of the fractional kernel integrals.
    VerifyKernels(CommonArgs),
    /// Sample fractional Gaussian noise and write fgn.csv.
    SampleFbm(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file; defaults are used without one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; falls back to FBMSHE_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Failures mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Invalid(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<fbmshe::Error> for CliError {
    fn from(e: fbmshe::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(CliError::Invalid("threads must be positive".into()));
    }
    Ok(n)
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("fbmshe: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside its own thread pool and returns the stdout
/// summary.
pub fn execute(command: &Command) -> Result<String, CliError> {
    let args = match command {
        Command::Simulate(a)
        | Command::ConvergeTime(a)
        | Command::ConvergeSpace(a)
        | Command::ConvergeTrunc(a)
        | Command::Hoelder(a)
        | Command::VerifyKernels(a)
        | Command::SampleFbm(a) => a,
    };
    let threads = thread_count(args.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    pool.install(|| commands::dispatch(command, args))
}
