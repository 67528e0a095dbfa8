mod commands;
mod config;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use mutaprobe_core::probe::ProbeTask;

/// Mutability-aware factual knowledge probing.
#[derive(Debug, Parser)]
#[command(name = "mutaprobe", version, about)]
pub struct Cli {
    /// TOML run configuration; flags and environment variables override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every stochastic stage.
    #[arg(long, global = true, env = "MUTAPROBE_SEED")]
    pub seed: Option<u64>,

    /// Base URL of a model adapter.
    #[arg(long = "adapter", global = true, env = "MUTAPROBE_ADAPTER_URL", value_name = "URL")]
    pub adapter_url: Option<String>,

    /// Row label used in printed tables.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the cloze benchmark from a knowledge graph.
    Ingest(IngestArgs),
    /// Score generations against the benchmark.
    Evaluate(EvaluateArgs),
    /// Measure how compressible mutability labels are from representations.
    Probe(ProbeArgs),
    /// Run the in-context update experiment.
    Update(UpdateArgs),
    /// Print the result tables from existing outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Relation manifest; the built-in one when omitted.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Dataset to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Read from a file-backed knowledge graph directory instead of SPARQL.
    #[arg(long, value_name = "DIR")]
    pub fixture: Option<PathBuf>,
    /// SPARQL endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Most popular subjects kept per relation.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Mean objects-per-subject threshold between one-to-one and one-to-many.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Profile cardinality on a seeded sample of this many subjects.
    #[arg(long)]
    pub profile_sample: Option<usize>,
    /// Keep going when a relation yields no queries.
    #[arg(long)]
    pub allow_empty: bool,
    /// Also write the build report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Generations to score; queried from the adapter when omitted.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Where to keep adapter generations.
    #[arg(long)]
    pub save_predictions: Option<PathBuf>,
    /// Score records to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregate with each relation's best template instead of the mean.
    #[arg(long)]
    pub best_template: bool,
    /// Directory for text and CSV tables.
    #[arg(long, value_name = "DIR")]
    pub tables: Option<PathBuf>,
    /// Wrap prompts in the adapter's instruction format.
    #[arg(long)]
    pub instruction_mode: bool,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Representation records; extracted through the adapter when omitted.
    #[arg(long)]
    pub representations: Option<PathBuf>,
    /// Where to keep adapter representations.
    #[arg(long)]
    pub save_representations: Option<PathBuf>,
    #[arg(long, value_parser = ProbeTask::from_str)]
    pub task: ProbeTask,
    /// Also probe relation-level random labels.
    #[arg(long, overrides_with = "no_control")]
    pub control: bool,
    #[arg(long)]
    pub no_control: bool,
    /// Block boundaries as comma-separated fractions of the training set.
    #[arg(long)]
    pub schedule: Option<String>,
    /// TOML with `train` and `val` relation lists, replacing the default split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Write the (query, template, object) triples the probe needs. Without a
    /// representation source the command stops after this.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Codelength report to write (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// Generations for the update prompts; queried from the adapter when
    /// omitted.
    #[arg(long)]
    pub generations: Option<PathBuf>,
    /// Minimum first-token probability for a query to count as memorized.
    #[arg(long)]
    pub conf_threshold: Option<f64>,
    /// Write the update cases here.
    #[arg(long)]
    pub cases: Option<PathBuf>,
    /// Stop after writing the cases.
    #[arg(long, requires = "cases")]
    pub cases_only: bool,
    /// Judged results to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub best_template: bool,
    /// Codelength reports written by `probe --out`.
    #[arg(long = "probe", value_name = "FILE")]
    pub probes: Vec<PathBuf>,
    /// Judged update results written by `update --out`.
    #[arg(long)]
    pub updates: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub tables: Option<PathBuf>,
}

/// Failure classes mapped to exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Pipeline(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Pipeline(e.into())
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_env("MUTAPROBE_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `mutaprobe --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
