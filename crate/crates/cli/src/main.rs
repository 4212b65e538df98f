//! Command-line surface: `select`, `fit`, `info`, `simulate`, `bootstrap`.
//!
//! Exit codes are a stable contract for scripting: 0 success, 1 I/O,
//! 2 validation, 3 numerical failure.

mod artifact;
mod commands;

use clap::{Args, Parser, Subcommand};
use clr_iboss::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const THREADS_ENV: &str = "CLRIBOSS_THREADS";

#[derive(Parser)]
#[command(
    name = "clriboss",
    version,
    about = "Informative subdata selection and EM fitting for clusterwise linear regression",
    after_help = "Exit codes: 0 success, 1 I/O error, 2 validation error, 3 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: CLRIBOSS_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded execution, for undistorted timing comparisons
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Select subdata rows from a CSV and write them as JSON
    Select(SelectArgs),
    /// Fit the mixture regression by EM on a CSV (optionally on a subset)
    Fit(FitArgs),
    /// Information-matrix report (complete, missing diagonal, surrogate) at fitted parameters
    Info(InfoArgs),
    /// Run a simulation study comparing selection methods
    Simulate(SimulateArgs),
    /// Bootstrap comparison on observed data against the full-data fit
    Bootstrap(BootstrapArgs),
}

#[derive(Args, serde::Serialize)]
struct SelectArgs {
    /// Input CSV with a header row; all non-response columns are covariates
    #[arg(long)]
    input: PathBuf,
    /// Output JSON path
    #[arg(long)]
    output: PathBuf,
    /// Selection method
    #[arg(long)]
    method: clr_iboss::Method,
    /// Subdata size; for iboss, k/(2p) must be a positive integer
    #[arg(long, required_if_eq_any([("method", "iboss"), ("method", "random")]))]
    k: Option<usize>,
    /// Name of the response column
    #[arg(long, default_value = "y")]
    response_col: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, serde::Serialize)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Selection JSON from `select`; omitted means fit the full data
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Cluster count
    #[arg(long, conflicts_with = "g_list", required_unless_present = "g_list")]
    g: Option<usize>,
    /// Candidate cluster counts, e.g. 1,2,3; the AIC minimizer is chosen
    #[arg(long = "g-list", value_delimiter = ',')]
    g_list: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value = "y")]
    response_col: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative loglikelihood change declaring convergence
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Args, serde::Serialize)]
struct InfoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Fit JSON (from `fit`) holding beta, sigma2, pi
    #[arg(long)]
    params: PathBuf,
    /// Selection JSON restricting the rows; omitted means all rows
    #[arg(long)]
    indices: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response_col: String,
    /// Absolute tolerance for the missing-information quadrature
    #[arg(long, default_value_t = 1e-10)]
    quad_tol: f64,
}

#[derive(Args, serde::Serialize)]
struct SimulateArgs {
    /// Simulation config JSON; defaults to the desk-scale configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the full-size study configuration (slow at full N)
    #[arg(long)]
    paper_scale: bool,
    /// Print the resolved configuration and exit without running
    #[arg(long)]
    dry_run: bool,
    /// Report JSON path (required unless --dry-run)
    #[arg(long, required_unless_present = "dry_run")]
    output: Option<PathBuf>,
    /// Optional long-format CSV of per-replicate rows
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Override the full data size N
    #[arg(long)]
    n: Option<usize>,
    /// Override the subdata size k
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args, serde::Serialize)]
struct BootstrapArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Optional long-format CSV of per-sample rows (all n values combined)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Cluster count for every fit
    #[arg(long)]
    g: usize,
    /// Subdata size within each bootstrap sample
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// Bootstrap sample sizes, e.g. 20000,40000,80000
    #[arg(long = "n-list", value_delimiter = ',')]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    b_samples: usize,
    /// Methods to compare within each bootstrap sample
    #[arg(long, value_delimiter = ',', default_values_t = [clr_iboss::Method::Iboss, clr_iboss::Method::Random])]
    methods: Vec<clr_iboss::Method>,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value = "y")]
    response_col: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_)
        | Error::Csv(_)
        | Error::CsvParse { .. }
        | Error::MissingResponseColumn { .. } => 1,
        Error::SingularGram { .. }
        | Error::EmptyCluster { .. }
        | Error::AllRestartsDegenerate { .. }
        | Error::QuadratureNonConvergence { .. }
        | Error::SingularCorrelation => 3,
        _ => 2,
    }
}

fn configure_threads(cli: &Cli) {
    let count = if cli.serial {
        Some(1)
    } else if let Some(n) = cli.threads {
        Some(n.max(1))
    } else {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .map(|n| n.max(1))
    };
    if let Some(n) = count {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(&cli);
    let result = match &cli.command {
        Command::Select(args) => commands::select(args),
        Command::Fit(args) => commands::fit(args),
        Command::Info(args) => commands::info(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Bootstrap(args) => commands::bootstrap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
