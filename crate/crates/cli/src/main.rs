use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::CliError;

/// Closed-form ridge regression, cross-validation, kernel and GLM fits,
/// matrix completion, and two simulation experiments.
///
/// Exit status: 0 on success, 1 on numerical failure, 2 on usage or input
/// errors. RIDGEKIT_THREADS caps the worker threads (0 or unset = auto).
#[derive(Debug, Parser)]
#[command(name = "ridgekit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ridge fit at one penalty: coefficients, intercept and training RSS.
    Fit(FitArgs),
    /// Coefficients along a penalty grid from one SVD.
    Path(PathArgs),
    /// Leave-one-out or k-fold scores over a penalty grid.
    Cv(CvArgs),
    /// Kernel ridge regression: dual coefficients and fitted values.
    KernelFit(KernelFitArgs),
    /// Ridge-penalized GLM by damped Newton.
    GlmFit(GlmFitArgs),
    /// Fill the missing cells of a matrix by alternating ridge.
    Complete(CompleteArgs),
    /// Reproduce a simulation study as CSV.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row; empty or NA cells are missing.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column; every other column is a feature.
    #[arg(long)]
    pub target: String,
    /// Scale centered columns to unit norm.
    #[arg(long)]
    pub standardize: bool,
    /// Fit without an intercept (no centering).
    #[arg(long)]
    pub no_intercept: bool,
}

#[derive(Debug, Args, Default)]
pub struct LambdaArgs {
    /// Single penalty.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["lambdas", "lambda_grid"])]
    pub lambda: Option<f64>,
    /// Comma-separated penalties.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "lambda_grid")]
    pub lambdas: Option<Vec<f64>>,
    /// Log-spaced grid `lo:hi:count`.
    #[arg(long)]
    pub lambda_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CvMethod {
    Loo,
    LooMinNorm,
    Kfold,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, value_enum, default_value = "loo")]
    pub method: CvMethod,
    /// Number of folds for `kfold`.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct KernelFitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    /// `linear`, `rbf:GAMMA` or `poly:DEGREE:OFFSET`.
    #[arg(long, default_value = "linear")]
    pub kernel: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
}

#[derive(Debug, Args)]
pub struct GlmFitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, value_enum, default_value = "binomial")]
    pub family: FamilyArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Matrix CSV with a header row; empty or NA cells are missing.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    /// Factor rank q.
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ridgekit::lowrank::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = ridgekit::lowrank::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// One line per cell (`row,column,observed,value,fitted`) instead of
    /// the completed matrix.
    #[arg(long)]
    pub long: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Ridge path on a simulated linear model: EPE, LOO and James-Stein.
    BiasVariance(BiasVarianceArgs),
    /// Minimum-norm additive spline fits across basis dimensions.
    DoubleDescent(DoubleDescentArgs),
}

#[derive(Debug, Args)]
pub struct BiasVarianceArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 54)]
    pub p: usize,
    #[arg(long, default_value_t = 3.3)]
    pub snr: f64,
    /// Explicit penalties replace the default 50-point scaled grid.
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DoubleDescentArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    /// Largest spline dimension per variable; the sweep runs 1..=max.
    #[arg(long, default_value_t = 30)]
    pub max_d: usize,
    #[arg(long, default_value_t = 10_000)]
    pub test_size: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RIDGEKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("RIDGEKIT_THREADS must be a nonnegative integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Path(a) => commands::path(&a),
        Command::Cv(a) => commands::cv(&a),
        Command::KernelFit(a) => commands::kernel_fit(&a),
        Command::GlmFit(a) => commands::glm_fit(&a),
        Command::Complete(a) => commands::complete(&a),
        Command::Experiment(ExperimentCommand::BiasVariance(a)) => commands::bias_variance(&a),
        Command::Experiment(ExperimentCommand::DoubleDescent(a)) => commands::double_descent(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
