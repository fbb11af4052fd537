//! `scorecam`: explain images, run the evaluation harnesses and the
//! randomization sanity check, and inspect model files.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or file format, 4 model, shape or
//! class errors, 5 empty results.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scorecam_core::{ErrorClass, ScoreMode, UpsampleMode};

#[derive(Debug, Parser)]
#[command(
    name = "scorecam",
    version,
    about = "Gradient-free class activation maps for small CNNs"
)]
pub struct Cli {
    /// Model file (SCAM format).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Directory for reports and images; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for commands that sample.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true, env = "SCORECAM_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Saliency map for one image.
    Explain(ExplainArgs),
    /// Recognition, deletion/insertion or pointing-game evaluation over a manifest.
    Eval(EvalArgs),
    /// Cascading parameter-randomization check on one image.
    Sanity(SanityArgs),
    /// Print the layer table of a model.
    ModelInfo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreModeArg {
    PostSoftmax,
    Logit,
}

impl From<ScoreModeArg> for ScoreMode {
    fn from(m: ScoreModeArg) -> Self {
        match m {
            ScoreModeArg::PostSoftmax => ScoreMode::PostSoftmax,
            ScoreModeArg::Logit => ScoreMode::Logit,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UpsampleArg {
    Bilinear,
    Nearest,
}

impl From<UpsampleArg> for UpsampleMode {
    fn from(m: UpsampleArg) -> Self {
        match m {
            UpsampleArg::Bilinear => UpsampleMode::Bilinear,
            UpsampleArg::Nearest => UpsampleMode::Nearest,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Graph index of the target Conv2d layer [default: last Conv2d].
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, value_enum, default_value = "post-softmax")]
    pub score_mode: ScoreModeArg,
    #[arg(long, value_enum, default_value = "bilinear")]
    pub upsample: UpsampleArg,
    /// Masked inputs per forward batch.
    #[arg(long, default_value_t = scorecam_core::DEFAULT_BATCH_SIZE, value_parser = positive)]
    pub batch: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Per-channel means, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = scorecam_core::io::preprocess::IMAGENET_MEAN)]
    pub mean: Vec<f64>,
    /// Per-channel standard deviations, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = scorecam_core::io::preprocess::IMAGENET_STD)]
    pub std: Vec<f64>,
    /// Divisor applied to pixel values before standardisation.
    #[arg(long, default_value_t = 1.0)]
    pub value_scale: f64,
    /// Skip standardisation (zero mean, unit std); images are only resized.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Target class [default: predicted].
    #[arg(long)]
    pub class: Option<usize>,
    /// Also write overlay.ppm.
    #[arg(long)]
    pub overlay: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvalKind {
    Recognition,
    Curves,
    Pointing,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub kind: EvalKind,
    /// Tab-separated manifest: path, label[, x,y,w,h].
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fraction of most salient pixels kept by the recognition metric.
    #[arg(long, default_value_t = scorecam_core::eval::DEFAULT_KEEP_FRACTION)]
    pub keep: f64,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Args)]
pub struct SanityArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Target class [default: predicted].
    #[arg(long)]
    pub class: Option<usize>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<scorecam_core::Error> for Failure {
    fn from(e: scorecam_core::Error) -> Self {
        let code = match e.class() {
            ErrorClass::Usage => 2,
            ErrorClass::Format => 3,
            ErrorClass::Model => 4,
            ErrorClass::Empty => 5,
        };
        Failure {
            code,
            message: format!("{}: {e}", e.name()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
