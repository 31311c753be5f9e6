mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Build word-order-permuted NLI evaluation sets and measure how often a
/// classifier still predicts the gold label.
#[derive(Parser, Debug)]
#[command(name = "permacc", version, about)]
pub struct Cli {
    /// TOML file with default flag values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (never changes outputs)
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the permuted evaluation set and its manifest
    Permute(PermuteArgs),
    /// Replace each training pair by one permutation
    PermuteTrain(PermuteTrainArgs),
    /// Run a model over a permuted set
    Evaluate(EvaluateArgs),
    /// Compute the metric report
    Report(ReportArgs),
    /// Acceptance swept over thresholds
    Sweep(SweepArgs),
    /// Acceptance by BLEU overlap with the original
    AnalyzeBleu(BleuArgs),
    /// Acceptance by POS mini-tree signature ratio
    AnalyzePos(PosArgs),
    /// Acceptance by sentence length
    AnalyzeLength(LengthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DatasetArgs {
    /// Dataset file
    #[arg(long)]
    pub input: PathBuf,
    /// jsonl or tsv; guessed from the extension when omitted
    #[arg(long)]
    pub input_format: Option<String>,
    /// Use MNLI/SNLI field names (pairID, sentence1, sentence2, gold_label)
    #[arg(long)]
    pub glue_fields: bool,
    /// Read token lists from premise_tokens / hypothesis_tokens
    #[arg(long)]
    pub pretokenized: bool,
}

#[derive(Args, Debug)]
pub struct PermuteArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Permuted-set output (JSONL); the manifest goes to <out>.manifest.json
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub min_tokens: Option<usize>,
    /// both or hypothesis_only
    #[arg(long)]
    pub mode: Option<String>,
    /// Shorthand for --mode hypothesis_only
    #[arg(long)]
    pub hypothesis_only: bool,
    /// Fraction of each sentence kept together as one unit
    #[arg(long)]
    pub clump: Option<f64>,
    /// Take every permutation setting from an earlier manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PermuteTrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Output dataset (canonical JSONL)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only one permutation per pair is supported
    #[arg(long, default_value_t = 1)]
    pub q: usize,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Permuted set written by `permute`
    #[arg(long)]
    pub records: PathBuf,
    /// Prediction output (JSONL)
    #[arg(long)]
    pub out: PathBuf,
    /// a, b, bow, file:PATH or http:URL
    #[arg(long)]
    pub model: String,
    /// Training set for the bow model
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub train_format: Option<String>,
    #[arg(long)]
    pub glue_fields: bool,
    /// Seed for model b
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// HTTP timeout in seconds
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub retries: Option<usize>,
    /// Keep predictions already in --out and add only the missing ones
    #[arg(long)]
    pub resume: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct JoinArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub join: JoinArgs,
    /// Directory for report.json, metrics.csv, per_example.csv and sweep.csv
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated thresholds, or a point count for an even grid
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Manifest to annotate with the model id and thresholds
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub join: JoinArgs,
    #[arg(long)]
    pub thresholds: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BleuArgs {
    #[command(flatten)]
    pub join: JoinArgs,
    #[arg(long)]
    pub bleu_order: Option<usize>,
    /// Comma-separated bucket edges
    #[arg(long)]
    pub buckets: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PosArgs {
    #[command(flatten)]
    pub join: JoinArgs,
    /// Tags for the evaluation originals
    #[arg(long)]
    pub tags: PathBuf,
    /// Saved signature table
    #[arg(long, conflicts_with = "train")]
    pub table: Option<PathBuf>,
    /// Training set to build the table from (needs --train-tags)
    #[arg(long, requires = "train_tags")]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub train_tags: Option<PathBuf>,
    #[arg(long)]
    pub train_format: Option<String>,
    #[arg(long)]
    pub glue_fields: bool,
    /// Write the built table here
    #[arg(long)]
    pub save_table: Option<PathBuf>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long)]
    pub buckets: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LengthArgs {
    #[command(flatten)]
    pub join: JoinArgs,
    /// Comma-separated lower edges; the last bucket is open-ended
    #[arg(long)]
    pub buckets: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
