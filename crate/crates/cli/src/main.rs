//! `revpatrol`: generate corpora, train and tune models, evaluate them, and
//! serve scores over a socket.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod commands;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "revpatrol",
    version,
    about = "Streaming vandalism detection for knowledge-base revision dumps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (dump.xml, meta.csv, labels.csv)
    Gen(GenArgs),
    /// Train the combined hashed model on the training slice of a corpus
    Train(TrainArgs),
    /// Grid-search the regularization C and report per-candidate AUC
    Gridsearch(GridsearchArgs),
    /// Score a labeled corpus slice with a model and print the metric report
    Eval(EvalArgs),
    /// Train the five per-family models plus the logistic stacker
    Stack(StackArgs),
    /// Serve scores over TCP until interrupted
    Serve(ServeArgs),
    /// Stream a corpus to a running server and collect its scores
    ScoreStream(ScoreStreamArgs),
}

#[derive(clap::Args)]
pub struct GenArgs {
    /// Number of revisions to generate
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0.0025)]
    positive_rate: f64,
    /// Probability a positive revision carries the planted token
    #[arg(long, default_value_t = 0.9)]
    signal: f64,
    #[arg(long, default_value_t = 0.35)]
    anon_rate: f64,
    /// First revision timestamp (date or RFC 3339)
    #[arg(long, default_value = "2015-01-01")]
    start: String,
    /// End of the revision time range, exclusive
    #[arg(long, default_value = "2016-05-01")]
    end: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the corpus files
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Corpus directory to ingest
    #[arg(long)]
    corpus: PathBuf,
    /// Hash width: the feature space has 2^bits buckets
    #[arg(long, default_value_t = 22)]
    bits: u32,
    /// Regularization trade-off
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Records at or after this timestamp are excluded from training
    #[arg(long, default_value = "2016-01-01")]
    train_end: String,
    /// Output model file
    #[arg(long)]
    model: PathBuf,
}

#[derive(clap::Args)]
pub struct GridsearchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 22)]
    bits: u32,
    /// Comma-separated C candidates; defaults to the decade ladder plus 0.5
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "2016-01-01")]
    train_end: String,
    /// Validation slice is [train-end, valid-end)
    #[arg(long, default_value = "2016-03-01")]
    valid_end: String,
    /// Report CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Decision threshold for the confusion-matrix metrics
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Which chronological slice to score
    #[arg(long, value_parser = ["train", "valid", "test", "all"], default_value = "test")]
    split: String,
    #[arg(long, default_value = "2016-01-01")]
    train_end: String,
    #[arg(long, default_value = "2016-03-01")]
    valid_end: String,
    /// Also write the one-line CSV report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct StackArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 18)]
    bits: u32,
    /// L2 strength for the logistic stacker
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "2016-01-01")]
    train_end: String,
    /// Directory receiving the five family models plus stacker.model
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Listen address
    #[arg(long, default_value = "127.0.0.1:7411")]
    listen: String,
}

#[derive(clap::Args)]
pub struct ScoreStreamArgs {
    /// Address of a running `revpatrol serve`
    #[arg(long)]
    connect: String,
    #[arg(long)]
    corpus: PathBuf,
    /// Bound on unanswered in-flight frames
    #[arg(long, default_value_t = 16)]
    window: usize,
    /// Output TSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors split by exit code: usage problems exit 1, data problems exit 2.
pub enum CliError {
    Usage(String),
    Data(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Data(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            let _ = err.print();
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Train(args) => commands::train(args),
        Command::Gridsearch(args) => commands::gridsearch(args),
        Command::Eval(args) => commands::eval(args),
        Command::Stack(args) => commands::stack(args),
        Command::Serve(args) => commands::serve(args),
        Command::ScoreStream(args) => commands::score_stream(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Data(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
