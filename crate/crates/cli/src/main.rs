//! `sharenet`: simulate, estimate, analyze and benchmark sharing-network panels.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

/// Exit codes are part of the interface.
const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("estimation did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(#[from] sharenet::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use sharenet::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Core(E::Config(_)) => EXIT_USAGE,
            CliError::Core(E::Singular { .. } | E::Numeric(_)) => EXIT_NOT_CONVERGED,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sharenet",
    version,
    about = "Sharing games on endogenous networks"
)]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "SHARENET_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate panels of groups under logit-response dynamics.
    Simulate(SimulateArgs),
    /// Fit the structural model to a panel file.
    Estimate(EstimateArgs),
    /// Stability census, outcome measures, treatment regressions, survey PCA.
    Analyze(AnalyzeArgs),
    /// Time both objectives across group sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON run configuration; its `simulation` section is used.
    #[arg(long, conflicts_with_all = ["groups", "treatment_groups", "n", "periods", "treatment_start", "theta", "q"])]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub treatment_groups: Option<usize>,
    /// Players per group.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub periods: Option<usize>,
    /// First treatment period; defaults to 16 or one past the last period.
    #[arg(long)]
    pub treatment_start: Option<usize>,
    /// Four comma-separated parameters: cost, generalized, treatment ×
    /// generalized, treatment × direct.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Contribution grid points.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Panel CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mle,
    Mple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SeArg {
    None,
    Asymptotic,
    Mc,
    Np,
    All,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Mle)]
    pub method: MethodArg,
    /// Player covariates; adds the twelve interaction parameters.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = SeArg::None)]
    pub se: SeArg,
    /// Bootstrap replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random starts besides the origin.
    #[arg(long)]
    pub multistart: Option<usize>,
    /// JSON run configuration; `estimation` and `bootstrap` sections are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Analysis {
    Stability,
    Metrics,
    Regressions,
    Pca,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Estimation report (or bare parameter JSON) supplying θ.
    #[arg(long)]
    pub theta_file: Option<PathBuf>,
    /// Inline θ, as for `simulate`.
    #[arg(long, conflicts_with = "theta_file", allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Analyses to run; comma-separated.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "metrics,regressions"
    )]
    pub what: Vec<Analysis>,
    /// Survey item file for the PCA (`group_id,player_id,trust,item_1,…`).
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    pub q: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Inclusive group-size range `MIN:MAX`.
    #[arg(long, default_value = "4:12")]
    pub n_range: String,
    #[arg(long, default_value_t = 21)]
    pub q: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub groups: usize,
    #[arg(long, default_value_t = 6)]
    pub periods: usize,
    /// Minimum wall time per measurement.
    #[arg(long, default_value_t = 20)]
    pub min_time_ms: u64,
    /// Scaling table CSV.
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Bench(a) => commands::bench(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sharenet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
