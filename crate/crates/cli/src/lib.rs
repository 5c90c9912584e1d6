//! Command-line front end for the contact-quality scorer: dataset
//! generation, training, single-pair scoring, parametric sweeps,
//! candidate detection in scenes and dataset evaluation. Every command
//! is deterministic for a fixed seed and config; structured reports go
//! to JSON, tabular ones to CSV.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use contactq_core::model::OutputHead;

pub mod commands;
pub mod dataset;
pub mod formats;

#[derive(Debug, Parser)]
#[command(name = "contactq", version, about = "Contact quality scoring for 3-D surface pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset: point CSVs plus a manifest.
    Generate(GenerateArgs),
    /// Train the classifier on a generated dataset.
    Train(TrainArgs),
    /// Score one surface pair against trained weights.
    Score(ScoreArgs),
    /// Score a parametric geometry sweep, one CSV row per step.
    Sweep(SweepArgs),
    /// Find candidate contacting surface pairs in a multi-surface scene.
    Detect(DetectArgs),
    /// Evaluate trained weights on a dataset split.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanKind {
    /// The 300-pair training plan.
    Default,
    /// The fixed 24-pair held-out table.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadKind {
    Softmax,
    Sigmoid,
}

impl From<HeadKind> for OutputHead {
    fn from(value: HeadKind) -> Self {
        match value {
            HeadKind::Softmax => OutputHead::Softmax,
            HeadKind::Sigmoid => OutputHead::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Translate,
    Rotate,
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitKind {
    Train,
    Validation,
    All,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory; receives manifest.json and a points/ tree.
    #[arg(long, env = "CONTACTQ_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42, env = "CONTACTQ_SEED")]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PlanKind::Default)]
    pub plan: PlanKind,
    /// Rotation-augmented copies per base pair.
    #[arg(long, default_value_t = 4, env = "CONTACTQ_AUGMENTATIONS")]
    pub augmentations: usize,
    /// Fraction of each class's base pairs assigned to the train split.
    #[arg(long, default_value_t = 0.75, env = "CONTACTQ_TRAIN_FRACTION")]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory produced by `generate`.
    #[arg(long, env = "CONTACTQ_DATA")]
    pub data: PathBuf,
    /// Output directory; receives weights.json and history.csv.
    #[arg(long, env = "CONTACTQ_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200, env = "CONTACTQ_EPOCHS")]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3, env = "CONTACTQ_LR")]
    pub lr: f64,
    #[arg(long, default_value_t = 16, env = "CONTACTQ_BATCH")]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = HeadKind::Softmax, env = "CONTACTQ_HEAD")]
    pub head: HeadKind,
    #[arg(long, default_value_t = 8, env = "CONTACTQ_COARSE_RES")]
    pub coarse_res: usize,
    #[arg(long, default_value_t = 16, env = "CONTACTQ_FINE_RES")]
    pub fine_res: usize,
    /// Seeds both weight initialization and epoch shuffling.
    #[arg(long, default_value_t = 42, env = "CONTACTQ_SEED")]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Trained weights JSON.
    #[arg(long, env = "CONTACTQ_WEIGHTS")]
    pub weights: PathBuf,
    /// Pair CSV holding exactly surfaces 1 and 2.
    #[arg(long)]
    pub points: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long, env = "CONTACTQ_OUT")]
    pub out: Option<PathBuf>,
    /// Also write mid-depth grid slice CSVs next to the report.
    #[arg(long)]
    pub emit_grids: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    #[arg(long, env = "CONTACTQ_WEIGHTS")]
    pub weights: PathBuf,
    /// CSV file; stdout when omitted.
    #[arg(long, env = "CONTACTQ_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Scene CSV with at least two distinct surface ids.
    #[arg(long)]
    pub points: PathBuf,
    /// Gap tolerance as a fraction of the largest body diagonal.
    #[arg(long, default_value_t = 0.05, env = "CONTACTQ_FRACTION")]
    pub fraction: f64,
    /// Report file; stdout when omitted.
    #[arg(long, env = "CONTACTQ_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "CONTACTQ_WEIGHTS")]
    pub weights: PathBuf,
    /// Dataset directory produced by `generate`.
    #[arg(long, env = "CONTACTQ_DATA")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitKind::Validation)]
    pub split: SplitKind,
    #[arg(long, default_value_t = 16, env = "CONTACTQ_BATCH")]
    pub batch: usize,
    /// Report file; stdout when omitted.
    #[arg(long, env = "CONTACTQ_OUT")]
    pub out: Option<PathBuf>,
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Train(args) => commands::train(&args),
        Command::Score(args) => commands::score(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Detect(args) => commands::detect(&args),
        Command::Eval(args) => commands::eval(&args),
    }
}
