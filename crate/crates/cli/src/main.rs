//! `spe`: estimate precision-recall curves from scores plus a few labels.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spe::report::Format;
use spe::SpeError;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "spe", version, about = "Semisupervised performance evaluation of binary classifiers")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank score distribution families per class by held-out likelihood.
    RankDists(RankArgs),
    /// MAP estimate of the score mixture.
    Fit(RunArgs),
    /// Full posterior: expected PR curve, bands and per-item probabilities.
    Evaluate(RunArgs),
    /// Probability that recall/precision floors hold at each threshold and a
    /// recommended threshold.
    Recalibrate(RecalibrateArgs),
    /// Compare SPE with the naive labeled-subset estimate on fully labeled data.
    Experiment(ExperimentArgs),
    /// Write a synthetic score file drawn from a known mixture.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// CSV with header `id,score[,label]`; blank labels are unknown.
    #[arg(long)]
    scores: PathBuf,
    /// Families as a list (all ordered pairs are tried) or explicit
    /// `negative/positive` pairs.
    #[arg(long)]
    families: Option<String>,
    /// Importance samples M.
    #[arg(long)]
    samples: Option<usize>,
    /// Optimizer starts for the MAP estimate.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Band quantile levels, strictly increasing in (0, 1).
    #[arg(long)]
    quantiles: Option<String>,
    /// Recall grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// TOML file with priors and defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct RecalibrateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Recall and precision floors `r,p`; repeatable.
    #[arg(long = "condition", required = true)]
    conditions: Vec<String>,
    /// Required posterior probability that the condition holds.
    #[arg(long, default_value_t = 0.9)]
    confidence: f64,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Families to rank; all when omitted.
    #[arg(long)]
    families: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Fraction of each class held out for scoring.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Label budgets, comma separated.
    #[arg(long, default_value = "20")]
    budget: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Draw this many items per trial first.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    items: usize,
    /// Fraction of positives.
    #[arg(long, default_value_t = 0.1)]
    pi: f64,
    /// Negative component as `family:p1,p2,...`.
    #[arg(long, default_value = "gamma:2,0.05")]
    negative: String,
    #[arg(long, default_value = "truncated-normal:0.7,0.1")]
    positive: String,
    /// Keep only this many labels, chosen at random.
    #[arg(long)]
    reveal: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &SpeError) -> u8 {
    match e.class() {
        "io" | "serialization" => 3,
        "fit" | "estimation" | "inference" | "curve" => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = match cli.command {
        Command::RankDists(a) => commands::rank_dists(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Recalibrate(a) => commands::recalibrate(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": { "class": e.class(), "message": e.to_string() }
            });
            eprintln!("{body}");
            ExitCode::from(exit_code(&e))
        }
    }
}
