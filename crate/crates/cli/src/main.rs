//! `gaitrisk`: batch front end for gait feature extraction, association
//! ranking and TUG regression evaluation.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ModelChoice;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gaitrisk", version, about = "Predict TUG scores from 3D gait recordings")]
struct Cli {
    /// TOML file with [extract], [rank], [evaluate] and [simulate] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract the 18 gait features from a directory of pose CSVs.
    Extract(ExtractArgs),
    /// Rank features by copula entropy with the TUG score.
    Rank(RankArgs),
    /// Rank, select and evaluate regression models over repeated splits.
    Evaluate(EvaluateArgs),
    /// Write a synthetic cohort of pose CSVs with a manifest.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of per-video pose CSVs named `<video_id>.csv`.
    #[arg(long)]
    pub pose_dir: PathBuf,
    /// Manifest CSV; defaults to manifest.csv inside the pose directory.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Feature CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Analysis window length in seconds [default: 5].
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Upper edge of the low-frequency band in Hz [default: 0.7].
    #[arg(long)]
    pub threshold_hz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Feature CSV from `extract`.
    #[arg(long)]
    pub features: PathBuf,
    /// Report JSON; the CSV table goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Neighbour count of the entropy estimator [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Leave tied feature values tied instead of ordering them pseudo-randomly.
    #[arg(long)]
    pub keep_ties: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature CSV from `extract`.
    #[arg(long)]
    pub features: PathBuf,
    /// Report JSON; summary, split and prediction CSVs go next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Models to evaluate [default: both].
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Number of top-ranked features to train on [default: 3].
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Neighbour count of the entropy estimator [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Random train/test splits [default: 100].
    #[arg(long)]
    pub n_splits: Option<usize>,
    /// Training share of each split [default: 0.8].
    #[arg(long)]
    pub train_ratio: Option<f64>,
    /// TUG seconds above which a subject counts as a faller [default: 13.5].
    #[arg(long)]
    pub cutoff_s: Option<f64>,
    /// Master seed for the splits [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed SVR cost; any fixed SVR flag disables the grid search.
    #[arg(long)]
    pub svr_c: Option<f64>,
    /// Fixed SVR tube half-width in seconds.
    #[arg(long)]
    pub svr_epsilon: Option<f64>,
    /// RBF width for a fixed SVR; linear kernel when omitted.
    #[arg(long)]
    pub svr_gamma: Option<f64>,
    /// Also evaluate with the next-ranked feature added.
    #[arg(long)]
    pub increment_check: bool,
    /// Leave tied feature values tied when ranking.
    #[arg(long)]
    pub keep_ties: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory for the pose CSVs, manifest.csv and truth.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of recordings, at least 10 [default: 146].
    #[arg(long)]
    pub n_videos: Option<usize>,
    /// Number of distinct subjects [default: 40].
    #[arg(long)]
    pub n_subjects: Option<usize>,
    /// Recording length in seconds [default: 20].
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Frame rate in Hz [default: 30].
    #[arg(long)]
    pub fps: Option<f64>,
    /// Per-coordinate noise standard deviation in meters [default: 0.001].
    #[arg(long)]
    pub sensor_noise_m: Option<f64>,
    /// Drive walkers from an independent draw instead of the TUG score.
    #[arg(long)]
    pub no_dependence: bool,
    /// Master seed of the cohort [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Extract(a) => commands::extract(a, &file),
        Command::Rank(a) => commands::rank(a, &file),
        Command::Evaluate(a) => commands::evaluate_cmd(a, &file),
        Command::Simulate(a) => commands::simulate(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
