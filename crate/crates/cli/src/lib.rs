//! Command-line front end: each pipeline stage is a subcommand that reads
//! and writes documented files.

mod commands;
mod runlog;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use runlog::{hash_path, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "surgnn",
    version,
    about = "Surgical skill assessment with graph attention networks"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(commands::SynthArgs),
    /// Extract per-unit kinematic features from a dataset.
    Extract(commands::ExtractArgs),
    /// Build standardized clip graphs from a feature table.
    BuildGraphs(commands::BuildGraphsArgs),
    /// Oversample minority classes of the training graphs with ADASYN.
    Balance(commands::BalanceArgs),
    /// Self-supervised pretraining of the encoder.
    Pretrain(commands::PretrainArgs),
    /// Supervised training of a classifier for one category.
    Train(commands::TrainArgs),
    /// Evaluate a classifier on one split.
    Evaluate(commands::EvaluateArgs),
    /// Gaussian random baseline.
    Baseline(commands::BaselineArgs),
    /// Export node and graph embeddings.
    Embed(commands::EmbedArgs),
    /// Project embeddings to 2D with PCA.
    Project(commands::ProjectArgs),
}

/// Training hyperparameter overrides shared by `pretrain` and `train`.
#[derive(Debug, Clone, Args)]
pub struct TrainOverrides {
    /// JSON file with TrainConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training epochs [default: 1000].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate [default: 0.0025].
    #[arg(long)]
    pub lr0: Option<f64>,
    /// Graphs per Adam step [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Share of nodes whose features are masked in pretraining [default: 0.15].
    #[arg(long)]
    pub mask_fraction: Option<f64>,
    /// Share of edges hidden from the encoder in pretraining [default: 0].
    #[arg(long)]
    pub edge_mask_fraction: Option<f64>,
    /// Laplacian eigenvectors appended as positional features [default: 4].
    #[arg(long)]
    pub spectral_k: Option<usize>,
    /// Weight of the spectral term in supervised training.
    #[arg(long)]
    pub joint_weight: Option<f64>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::dispatch(&cli, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
