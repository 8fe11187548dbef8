mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Invalid flags or configuration. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "rnncache", version, about = "Trace-driven SSD cache simulator with learned admission")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// RNG seed for generation and training; also echoed in reports.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cache capacity in 4 KB pages (default: 20% of the trace's working set).
    #[arg(long, global = true)]
    pub capacity: Option<usize>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trace CSV.
    Gen(GenArgs),
    /// Replay the offline oracle and write the tagged trace.
    Label(LabelArgs),
    /// Train a characterizer or cache-decision model.
    Train(TrainArgs),
    /// Simulate one policy over a trace.
    Simulate(SimArgs),
    /// Simulate several policies over the same trace.
    Compare(SimArgs),
    /// Summarize a report CSV or evaluate the improvement metric.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true)
    .args(["category", "profile", "profile_file", "scenario", "cyclic"])))]
pub struct GenArgs {
    /// Workload category: mail, web, db or file.
    #[arg(long)]
    pub category: Option<String>,
    /// Published trace name whose size and read/write mix to mimic.
    #[arg(long)]
    pub profile: Option<String>,
    /// TOML file with explicit generator profile fields.
    #[arg(long)]
    pub profile_file: Option<PathBuf>,
    /// Multi-application mix: single, virt or storage.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Cyclic scan over this many distinct pages.
    #[arg(long)]
    pub cyclic: Option<usize>,
    /// Number of passes for `--cyclic`.
    #[arg(long, default_value_t = 10)]
    pub cycles: usize,
    /// Requests to generate (per stream for scenarios).
    #[arg(short = 'n', long = "requests", default_value_t = 20_000)]
    pub requests: usize,
    /// Output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Characterizer,
    CacheModel,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: ModelKind,
    /// Category-tagged traces (characterizer) or labeled traces (cache model).
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch history CSV (default: `<out>.history.csv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Cache model only.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Cache model only.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Cache model only: keep the final epoch instead of the one with the
    /// lowest loss on a validation slice of the training windows.
    #[arg(long)]
    pub no_select: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Policy for `simulate`, or comma-separated list for `compare`.
    #[arg(long = "policy", alias = "policies", value_delimiter = ',')]
    pub policies: Vec<String>,
    /// Cache-decision model for rcrnn (overrides `models.cache`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub characterizer: Option<PathBuf>,
    #[arg(long)]
    pub no_monitor: bool,
    #[arg(long)]
    pub report_csv: Option<PathBuf>,
    #[arg(long)]
    pub report_text: Option<PathBuf>,
    #[arg(long)]
    pub series_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["input", "improvement"])))]
pub struct ReportArgs {
    /// Report CSV written by `simulate` or `compare`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Policy the others are compared against.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Four accuracies: model cached, model duration, baseline cached,
    /// baseline duration.
    #[arg(long, value_delimiter = ',')]
    pub improvement: Option<Vec<f64>>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<rnncache::Error>() {
        Some(rnncache::Error::MissingModel(_) | rnncache::Error::InvalidArgument(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(&cli.common, a),
        Command::Label(a) => commands::label(&cli.common, a),
        Command::Train(a) => commands::train(&cli.common, a),
        Command::Simulate(a) => commands::simulate(&cli.common, a, false),
        Command::Compare(a) => commands::simulate(&cli.common, a, true),
        Command::Report(a) => commands::report(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
