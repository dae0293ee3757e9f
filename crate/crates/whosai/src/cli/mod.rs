//! Command-line interface: corpus synthesis, training, evaluation,
//! classification, category registration, 2D projection, and gradient
//! checking.
//!
//! Exit codes: 0 success, 1 check/verification failure, 2 usage error.
//! All randomness flows from `--seed`; identical flags and seed produce
//! byte-identical output files. Environment variables are not consulted.

mod commands;
mod config_file;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use config_file::{parse_config_file, KNOWN_KEYS};

#[derive(Parser, Debug)]
#[command(
    name = "whosai",
    version,
    about = "Contrastive authorship detection and attribution for AI-generated text"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic multi-generator corpus (JSONL)
    Synth(SynthArgs),
    /// Train the encoder and build a centroid store
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint and centroid store on a labeled corpus
    Eval(EvalArgs),
    /// Classify texts with a trained checkpoint and centroid store
    Classify(ClassifyArgs),
    /// Register a new category into an existing centroid store
    Register(RegisterArgs),
    /// Project a corpus into 2D coordinates (CSV)
    Project(ProjectArgs),
    /// Check analytic gradients against central finite differences
    GradCheck(GradCheckArgs),
}

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Number of synthetic generators (classes besides "human")
    #[arg(long, default_value_t = 5)]
    pub generators: usize,
    /// Documents per class
    #[arg(long = "per-class", default_value_t = 400)]
    pub per_class: usize,
    /// Target tokens per document
    #[arg(long = "doc-length", default_value_t = 120)]
    pub doc_length: usize,
    /// Plain-text seed file for the human class (builtin text if omitted)
    #[arg(long = "human-source")]
    pub human_source: Option<PathBuf>,
    /// Comma-separated per-generator Markov orders
    #[arg(long)]
    pub orders: Option<String>,
    /// Comma-separated per-generator sampling temperatures
    #[arg(long)]
    pub temperatures: Option<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output corpus path (JSONL)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    /// Authorship attribution (multi-class)
    Aa,
    /// Turing test (binary human-vs-AI)
    Tt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CorruptionArg {
    Off,
    /// Token deletion
    Td,
    /// Span cropping
    Sc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    All,
    Largest,
    Smallest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MarginModeArg {
    StepIncrease,
    PaperMod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Cosine,
    SqEuclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    /// Fast small-scale defaults
    Desk,
    /// Full-scale hyperparameters
    Paper,
}

#[derive(clap::Args, Debug, Default)]
pub struct TrainArgs {
    /// Labeled corpus (JSONL, or CSV with --csv-* columns)
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output directory for model.wai1, centroids.json, log.jsonl and splits
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional key = value config file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Label treated as human for --task tt
    #[arg(long = "human-label")]
    pub human_label: Option<String>,
    /// Keep all generators, or one size variant per family
    #[arg(long = "generator-subset", value_enum)]
    pub generator_subset: Option<SubsetArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "train-frac")]
    pub train_frac: Option<f64>,
    #[arg(long = "val-frac")]
    pub val_frac: Option<f64>,
    /// External embeddings JSONL; replaces the pooled stage
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long = "weight-decay")]
    pub weight_decay: Option<f64>,
    #[arg(long = "warmup-steps")]
    pub warmup_steps: Option<u64>,
    #[arg(long = "grad-clip")]
    pub grad_clip: Option<f64>,
    #[arg(long = "eval-every")]
    pub eval_every: Option<u64>,

    /// Dynamic margin scheduling on/off (off freezes the margin at lambda-min)
    #[arg(long = "dynamic-margin", value_enum)]
    pub dynamic_margin: Option<OnOff>,
    #[arg(long = "lambda-min")]
    pub lambda_min: Option<f64>,
    #[arg(long = "lambda-delta")]
    pub lambda_delta: Option<f64>,
    /// Steps between margin increments
    #[arg(long)]
    pub delta: Option<u64>,
    #[arg(long = "margin-mode", value_enum)]
    pub margin_mode: Option<MarginModeArg>,

    /// Online multi-similarity mining on/off (off falls back to random
    /// offline triplets)
    #[arg(long, value_enum)]
    pub miner: Option<OnOff>,
    /// Mining slack
    #[arg(long)]
    pub epsilon: Option<f64>,

    #[arg(long, value_enum)]
    pub corruption: Option<CorruptionArg>,
    /// Token-deletion probability
    #[arg(long)]
    pub p: Option<f64>,
    /// Span-start probability
    #[arg(long = "ps")]
    pub p_s: Option<f64>,
    /// Relative max span size
    #[arg(long = "pspan")]
    pub p_span: Option<f64>,

    #[arg(long, value_enum)]
    pub distance: Option<DistanceArg>,

    #[arg(long = "ngram-n")]
    pub ngram_n: Option<usize>,
    #[arg(long = "vocab-size")]
    pub vocab_size: Option<usize>,
    #[arg(long = "embed-dim")]
    pub embed_dim: Option<usize>,
    #[arg(long = "hidden-dim")]
    pub hidden_dim: Option<usize>,
    #[arg(long = "out-dim")]
    pub out_dim: Option<usize>,

    /// Text column when --corpus is a CSV file
    #[arg(long = "csv-text-column", default_value = "text")]
    pub csv_text_column: String,
    /// Label column when --corpus is a CSV file
    #[arg(long = "csv-label-column", default_value = "label")]
    pub csv_label_column: String,
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub centroids: PathBuf,
    /// Labeled corpus to evaluate (JSONL)
    #[arg(long)]
    pub corpus: PathBuf,
    /// External embeddings JSONL, for models trained from a store
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Report JSON path (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confusion matrix CSV path
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Relabel to the binary task before evaluating
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long = "human-label", default_value = "human")]
    pub human_label: String,
}

#[derive(clap::Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub centroids: PathBuf,
    /// JSONL input with id and text fields (stdin lines if omitted)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output JSONL path (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct RegisterArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Existing centroid store (left untouched)
    #[arg(long)]
    pub store: PathBuf,
    /// JSONL docs of the new category (labels in the file are ignored)
    #[arg(long)]
    pub docs: PathBuf,
    /// Name of the new category
    #[arg(long)]
    pub label: String,
    /// Path of the updated store
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct ProjectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled corpus to project (JSONL)
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output CSV path (columns id,label,x,y)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Central-difference step
    #[arg(long = "fd-step", default_value_t = 1e-4)]
    pub fd_step: f64,
    /// Pass/fail threshold on the max relative error
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
}

/// Did the command succeed, and if so did the check it ran pass?
pub enum Outcome {
    Success,
    CheckFailed,
}

/// Parses `args` and runs the selected command, returning the process exit
/// code (0 success, 1 failure, 2 usage error).
pub fn try_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_default_env()
        .format_timestamp(None)
        .try_init();
    match run(cli.command) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::CheckFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(command: Command) -> crate::error::Result<Outcome> {
    match command {
        Command::Synth(args) => commands::run_synth(&args).map(|_| Outcome::Success),
        Command::Train(args) => commands::run_train(&args).map(|_| Outcome::Success),
        Command::Eval(args) => commands::run_eval(&args).map(|_| Outcome::Success),
        Command::Classify(args) => commands::run_classify(&args).map(|_| Outcome::Success),
        Command::Register(args) => commands::run_register(&args).map(|_| Outcome::Success),
        Command::Project(args) => commands::run_project(&args).map(|_| Outcome::Success),
        Command::GradCheck(args) => commands::run_grad_check(&args).map(|passed| {
            if passed {
                Outcome::Success
            } else {
                Outcome::CheckFailed
            }
        }),
    }
}
