//! `mgr`: synthetic corpus generation, feature extraction, splitting,
//! training, evaluation, prediction, gradient checks and report plotting.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for bad flags or flag combinations.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for missing, malformed or inconsistent data.
pub const EXIT_DATA: u8 = 3;
/// Exit status when training diverges.
pub const EXIT_DIVERGENCE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "mgr", version, about = "Music genre recognition pipeline")]
pub struct Cli {
    /// JSON file with `dsp`, `segments`, `epochs`, `batch_size` and `learning_rate` defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus of WAV files plus manifest.json.
    Synth(SynthArgs),
    /// Segment every manifest clip and extract MFCC features.
    Extract(ExtractArgs),
    /// Produce a train/valid/test split file.
    Split(SplitArgs),
    /// Train a model and write a checkpoint and report.
    Train(TrainArgs),
    /// Score a checkpoint on part of a feature file.
    Eval(EvalArgs),
    /// Classify a WAV clip.
    Predict(PredictArgs),
    /// Finite-difference gradient checks of every layer.
    Gradcheck(GradcheckArgs),
    /// Write CSV and SVG training curves from a report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub genres: usize,
    #[arg(long, default_value_t = 20)]
    pub clips_per_genre: usize,
    #[arg(long, default_value_t = 30.0)]
    pub clip_seconds: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Segments per clip (30 gives 1 s pieces of a 30 s clip, 1200 gives 25 ms).
    #[arg(long)]
    pub segments: Option<usize>,
    /// Keep this many randomly chosen clips per genre.
    #[arg(long)]
    pub balance: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "8:1:1")]
    pub ratios: String,
    /// Number of stratified folds; 0 splits the whole dataset.
    #[arg(long, default_value_t = 0)]
    pub kfold: usize,
    /// Fold to split (defaults to the last one).
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Split file; when absent the split is derived from --ratios/--kfold.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value = "cnn")]
    pub model: String,
    /// Experiment 1..=6; sets epochs, ratios and the dropout variant.
    #[arg(long)]
    pub experiment: Option<u32>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub ratios: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub kfold: usize,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path; the report goes next to it unless --report is given.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// train, valid, test, or all.
    #[arg(long, default_value = "test")]
    pub part: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    /// Segments per clip; defaults to the value recorded at extraction.
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// `all` or one of dense, relu, softmax_ce, dropout, conv2d, maxpool2d, batchnorm2d, flatten.
    #[arg(long, default_value = "all")]
    pub layer: String,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Output prefix; writes `<out>.csv` and `<out>.svg`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Flag errors that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(mgr_core::train::TrainError::Divergence { .. }) = cause.downcast_ref() {
            return EXIT_DIVERGENCE;
        }
        if let Some(e) = cause.downcast_ref::<mgr_core::Error>() {
            if e.is_divergence() {
                return EXIT_DIVERGENCE;
            }
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
