//! Pipeline front end: simulate ratings with a planted friendship graph,
//! encode the graph into per-node bit signatures, take exact graph powers,
//! train and evaluate factorization models, benchmark the encoder, sweep
//! hyperparameters, and verify the common-bit envelopes.
//!
//! Exit codes: 0 ok, 2 usage, 3 input, 4 numeric divergence, 5 resource cap.
//! Failures print one machine-parsable line: `error[<class>]: <message>`.

mod cmd;
mod manifest;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Core(graph_dna::Error),
    Usage(String),
    Io(String, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io(path, e) => write!(f, "{path}: {e}"),
        }
    }
}

impl From<graph_dna::Error> for CliError {
    fn from(e: graph_dna::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// `(class, exit code)` for the one-line error report.
    fn classify(&self) -> (&'static str, u8) {
        use graph_dna::Error::*;
        match self {
            CliError::Usage(_) => ("usage", 2),
            CliError::Io(..) => ("input", 3),
            CliError::Core(e) => match e {
                InvalidParam(_) => ("usage", 2),
                NnzCap { .. } => ("nnz-cap", 5),
                Diverged { .. } => ("numeric-divergence", 4),
                _ => ("input", 3),
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "graph-dna",
    about = "Bloom-signature graph encoding and graph-regularized factorization",
    version
)]
struct Cli {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic ratings plus a friendship graph.
    Simulate(cmd::simulate::Args),
    /// Encode a graph into per-node bit signatures.
    Encode(cmd::encode::Args),
    /// Exact weighted matrix-power combination with thresholding.
    Power(cmd::power::Args),
    /// Train a factorization model.
    Train(cmd::train::Args),
    /// Evaluate a trained model.
    Eval(cmd::eval::Args),
    /// Time the encoder over a range of depths.
    Bench(cmd::bench::Args),
    /// Grid-search the regularization weights on the validation split.
    Sweep(cmd::sweep::Args),
    /// Monte-Carlo verification of the common-bit envelopes.
    Bounds(cmd::bounds::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error when a pool already exists (e.g. repeated calls
        // under a test harness); the first configuration wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd::simulate::run(args, cli.config.as_deref()),
        Command::Encode(args) => cmd::encode::run(args, cli.config.as_deref()),
        Command::Power(args) => cmd::power::run(args, cli.config.as_deref()),
        Command::Train(args) => cmd::train::run(args, cli.config.as_deref()),
        Command::Eval(args) => cmd::eval::run(args, cli.config.as_deref()),
        Command::Bench(args) => cmd::bench::run(args, cli.config.as_deref()),
        Command::Sweep(args) => cmd::sweep::run(args, cli.config.as_deref()),
        Command::Bounds(args) => cmd::bounds::run(args, cli.config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (class, code) = err.classify();
            eprintln!("error[{class}]: {err}");
            ExitCode::from(code)
        }
    }
}
