//! `wass-shrink`: robust precision-matrix estimation from the command line.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a numerical
//! routine fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "wass-shrink", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a precision matrix from observations at a fixed radius.
    Estimate(EstimateArgs),
    /// Choose the radius (or linear-shrinkage weight) by cross-validation.
    Tune(TuneArgs),
    /// Extremal covariance of the Wasserstein ball around a covariance matrix.
    Worstcase(WorstCaseArgs),
    /// Synthetic Stein-loss benchmark, written as a long CSV table.
    Synthetic(SyntheticArgs),
    /// Linear discriminant analysis with a cross-validated radius.
    Lda(LdaArgs),
    /// Rolling minimum-variance portfolio backtest.
    Portfolio(PortfolioArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DivisorArg {
    N,
    #[value(name = "n-1")]
    NMinusOne,
    Pooled,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Projected-gradient tolerance of the iterative solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of the iterative solver.
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EstimateArgs {
    /// Observations CSV (rows = observations).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rho: f64,
    /// Known zeros of the precision matrix (JSON, 1-based indices).
    #[arg(long)]
    pattern: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "n")]
    divisor: DivisorArg,
    /// Precision CSV destination; diagnostics go to the same path with a `.json` extension.
    /// Without it the matrix goes to stdout and the diagnostics to stderr.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    input: PathBuf,
    /// Grid JSON; its `param` picks the estimator (`rho` or `alpha`).
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    pattern: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "n")]
    divisor: DivisorArg,
    /// `loo` or `kfold:K`.
    #[arg(long, default_value = "kfold:5")]
    cv: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct WorstCaseArgs {
    /// Nominal covariance CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rho: f64,
    /// Precision CSV to evaluate; defaults to the robust estimate at `--rho`.
    #[arg(long)]
    precision: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Fraction of nonzero entries of the sign matrix.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Grid JSON for the radius.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Adds an arm imposing this fraction of the true zeros; repeatable.
    #[arg(long)]
    known_fraction: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct LdaArgs {
    /// Feature CSV.
    #[arg(long)]
    input: PathBuf,
    /// Single-column label CSV aligned with the feature rows.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pooled")]
    divisor: DivisorArg,
    #[arg(long, default_value = "kfold:5")]
    cv: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PortfolioArgs {
    /// Returns CSV (rows = periods, columns = assets).
    #[arg(long)]
    input: PathBuf,
    /// Fixed radius; mutually exclusive with `--grid`.
    #[arg(long, conflicts_with = "grid")]
    rho: Option<f64>,
    /// Grid JSON; the radius is tuned on the first window.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value = "kfold:5")]
    cv: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Tune(a) => commands::tune(a),
        Command::Worstcase(a) => commands::worstcase(a),
        Command::Synthetic(a) => commands::synthetic(a),
        Command::Lda(a) => commands::lda(a),
        Command::Portfolio(a) => commands::portfolio(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit_code())
        }
    }
}
