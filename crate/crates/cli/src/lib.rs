//! The `cdfuse` command line: evolve fusion programs, apply them, score and
//! rank mask producers, run the toy detectors and baselines, and generate
//! synthetic data.

pub mod report;

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::execute;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cdfuse_core::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "cdfuse", version, about = "Evolve and evaluate fusions of change-detection masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a fusion program on the training videos.
    Evolve(EvolveArgs),
    /// Run a fusion program over a dataset and write its masks.
    Apply(ApplyArgs),
    /// Score prediction mask trees against the ground truth.
    Score(ScoreArgs),
    /// Rank the pool algorithms of a dataset.
    Rank(RankArgs),
    /// Run a built-in change detector over every video.
    Detect(DetectArgs),
    /// Majority-vote fusion of the first k pool algorithms.
    Baseline(BaselineArgs),
    /// Generate a synthetic video or a complete synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct VideoSelection {
    /// Which videos to process.
    #[arg(long, value_enum, default_value_t = Subset::All)]
    pub subset: Subset,
    /// `auto` (shortest video per category) or a file of category/video lines.
    #[arg(long, default_value = "auto")]
    pub train_split: String,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Run configuration (flat key = value file).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set max_generations=20.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Pool algorithms under results/, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub pool: Vec<String>,
    #[arg(long, default_value = "auto")]
    pub train_split: String,
    /// Where to write the best program.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for history.csv and per-generation trees.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Pool-measure cache; read if present, written otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluation threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub pool: Vec<String>,
    /// Output root, written in the results layout.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub videos: VideoSelection,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Prediction root as DIR or NAME=DIR; repeat to rank several methods.
    #[arg(long, required = true)]
    pub pred: Vec<String>,
    /// CSV report path.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub videos: VideoSelection,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub pool: Vec<String>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub videos: VideoSelection,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    Framediff,
    Median,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub method: DetectorKind,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Intensity threshold for framediff and median.
    #[arg(long, default_value_t = 30)]
    pub threshold: u8,
    /// Median window in frames (odd).
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.5)]
    pub k: f64,
    #[arg(long, default_value_t = 100.0)]
    pub initial_var: f64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Mv,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(value_enum)]
    pub kind: BaselineKind,
    /// Number of pool algorithms to vote (odd, >= 3); default all.
    #[arg(short = 'k')]
    pub k: Option<usize>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub pool: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub videos: VideoSelection,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scene", "demo"]))]
pub struct SynthArgs {
    /// Scene description (key = value) to render as one video.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Generate the four-video demo dataset with corrupted pool detectors.
    #[arg(long)]
    pub demo: bool,
    /// Extra pure-noise detectors in the demo pool.
    #[arg(long, default_value_t = 0)]
    pub noise_detectors: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
