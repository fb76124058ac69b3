//! `scbow`: train sentence-oriented word embeddings and evaluate embedding
//! tables on sentence-pair similarity data.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate input
//! for a statistic.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use scbow_core::Error;

#[derive(Debug, Parser)]
#[command(name = "scbow", version, about = "Siamese CBOW word embeddings for sentence similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train embeddings on a sentence-per-line corpus.
    Train(TrainArgs),
    /// Score embeddings on sentence-pair datasets.
    Eval(EvalArgs),
    /// Wilcoxon signed-rank comparison of two score files.
    Compare(CompareArgs),
    /// Norm rankings and nearest neighbours.
    Analyze(AnalyzeArgs),
    /// Time per-pair similarity scoring.
    Bench(BenchArgs),
    /// Convert a checkpoint to the text format.
    Export(ConvertArgs),
    /// Convert a text embedding file to a checkpoint.
    Import(ConvertArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Corpus file or directory (one sentence per line, blank line between documents).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output embedding file; a directory of per-run subdirectories for sweeps.
    #[arg(long)]
    pub output: PathBuf,
    /// Embedding size; a comma list runs a sweep.
    #[arg(long, value_delimiter = ',', default_value = "300")]
    pub dim: Vec<usize>,
    /// Negative sentences per example; a comma list runs a sweep.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub negatives: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.0001)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    /// Fraction of the initial learning rate the schedule decays to.
    #[arg(long, default_value_t = 0.0)]
    pub lr_floor: f64,
    /// Report progress every N examples.
    #[arg(long, default_value_t = 10_000)]
    pub progress_every: u64,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs in this invocation (resume later).
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Tsv,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Text embedding file or checkpoint.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// One or more `left TAB right TAB gold` files.
    #[arg(long, required = true, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report: ReportFormat,
    /// Write `<dataset>.scores.tsv` files here for `compare`.
    #[arg(long)]
    pub scores_dir: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub run_a: PathBuf,
    #[arg(long)]
    pub run_b: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Show the K lowest- and highest-norm words.
    #[arg(long)]
    pub norms: Option<usize>,
    /// Show words similar to TOKEN.
    #[arg(long)]
    pub neighbors: Option<String>,
    #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
    pub min_cos: f64,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Core(Error::InvalidConfig(_)) => 1,
            Failure::Core(Error::DegenerateInput(_)) => 3,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::Export(args) => commands::export(&args),
        Command::Import(args) => commands::import(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("scbow: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
