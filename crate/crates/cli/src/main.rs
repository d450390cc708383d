//! `refeval`: generate color reference games, train listener models, score
//! candidate utterances with overlap metrics and listeners, and correlate
//! the scores against the known candidate quality categories.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags, bad values,
//! missing settings), 1 for data errors (unreadable or malformed files).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use refeval_core::Error;

mod commands;
mod config;

use config::FileConfig;

#[derive(Parser)]
#[command(name = "refeval", version, about = "Color reference game evaluation pipeline")]
struct Cli {
    /// TOML config file; flags override its values (see `config.rs` docs).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus of color reference games.
    Gen(GenArgs),
    /// Train a listener model on a corpus.
    Train(TrainArgs),
    /// Score every candidate utterance with the requested metrics.
    Score(ScoreArgs),
    /// Correlate metric scores with candidate quality categories.
    Correlate(CorrelateArgs),
    /// Summarize score distributions per metric and category.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of context pairs; each pair yields two 3-color contexts.
    #[arg(long, value_name = "N")]
    pairs: Option<usize>,
    /// Reference utterances per context.
    #[arg(long, value_name = "N")]
    refs: Option<usize>,
    /// RNG seed.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Output corpus path (JSONL).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Color lexicon TOML; defaults to the built-in English lexicon.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Which listener to train: literal or pragmatic.
    #[arg(long, value_name = "KIND")]
    model: Option<String>,
    /// Training corpus (JSONL or CSV).
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Output model path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Training epochs [default: 10].
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long, value_name = "RATE")]
    lr: Option<f64>,
    /// RNG seed for init, shuffling, and the holdout split.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Color featurization: raw_hsv or fourier [default: raw_hsv].
    #[arg(long, value_name = "MODE")]
    features: Option<String>,
    /// Pretrained word embedding file (pragmatic model only).
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Fraction of pair groups held out; prints their accuracy as JSON.
    #[arg(long, value_name = "FRACTION")]
    holdout: Option<f64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Comma-separated metrics: bleu1-bleu4, meteor, rouge-l, cider,
    /// oracle, literal, pragmatic, human-import.
    #[arg(long, value_name = "LIST")]
    metrics: Option<String>,
    /// Corpus to score (JSONL or CSV).
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Output score table path (JSONL).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Model file for a listener metric, as name=path; repeatable.
    #[arg(long, value_name = "NAME=FILE")]
    model: Vec<String>,
    /// Score table of human judgments for human-import.
    #[arg(long, value_name = "FILE")]
    human: Option<PathBuf>,
    /// Color lexicon TOML for the oracle listener.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Score table produced by `score`.
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    /// The corpus those scores were computed on.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Output report path (JSON).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Score table produced by `score`.
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    /// Output report path (JSON).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Kernel density bandwidth [default: 0.2].
    #[arg(long, value_name = "H")]
    bandwidth: Option<f64>,
    /// Density evaluation grid as lo,hi,steps (e.g. 0,1,101).
    #[arg(long, value_name = "LO,HI,STEPS")]
    grid: Option<String>,
}

fn run(cli: Cli) -> refeval_core::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Cmd::Gen(args) => commands::run_gen(args, &file),
        Cmd::Train(args) => commands::run_train(args, &file),
        Cmd::Score(args) => commands::run_score(args, &file),
        Cmd::Correlate(args) => commands::run_correlate(args, &file),
        Cmd::Report(args) => commands::run_report(args, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here too; they are not errors.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
