//! `causal-bench`: generate benchmark data, run baseline estimators, and
//! score predictions.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "causal-bench", version, about)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate instance pairs for one evaluation track.
    Generate(GenerateArgs),
    /// Run a baseline estimator over every observation file in a directory.
    Estimate(EstimateArgs),
    /// Score predictions against label files.
    Score(ScoreArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// TOML file with one DGP config, or several `[[dgp]]` tables.
    #[arg(long)]
    pub config: PathBuf,
    /// Covariate table (`x.csv` format).
    #[arg(long, conflicts_with = "synthetic_covariates", required_unless_present = "synthetic_covariates")]
    pub covariates: Option<PathBuf>,
    /// Generate a synthetic covariate table with N rows and P features.
    #[arg(long, value_name = "N,P")]
    pub synthetic_covariates: Option<String>,
    /// Seed for the synthetic covariate table.
    #[arg(long, default_value_t = 0)]
    pub covariate_seed: u64,
    /// Output root; pairs go to `<out>/<track>/`, the covariates to `<out>/x.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = ["scaling", "censoring"])]
    pub track: String,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Directory holding observation files.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = ["diff_means", "ipw", "regression"])]
    pub method: String,
    /// Population prediction file, or a directory for `regression`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = causal_bench_core::estimators::DEFAULT_BOOTSTRAP_REPS)]
    pub bootstrap_reps: usize,
    /// Covariate table; defaults to `x.csv` in the data directory or its parent.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Population prediction file, or a directory of `<ufid>.csv` files with `--individual`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Directory holding `<ufid>_cf.csv` label files.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = ["scaling", "censoring"])]
    pub track: String,
    /// Score individual-effect predictions.
    #[arg(long)]
    pub individual: bool,
    /// Report CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Estimate(args) => commands::estimate(&args),
        Command::Score(args) => commands::score(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
