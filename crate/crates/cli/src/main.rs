use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{EmbedderChoice, RunConfig};
use repofix_core::refine::CheckerChoice;

/// Index a Python project, check generated code against it, and repair
/// the code with project-aware retrieval.
#[derive(Debug, Parser)]
#[command(name = "repofix", version, about)]
pub struct Cli {
    /// Settings file (TOML, or JSON with a .json extension). Flags win over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Where to write the machine-readable run summary (default: stderr).
    #[arg(long, global = true, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a project database from a source tree.
    Index(IndexArgs),
    /// Check one file (or a candidate version of it) against a database.
    Check(CheckArgs),
    /// Run a structural query, or the lookup for a diagnostic.
    Query(QueryArgs),
    /// Generate and iteratively repair code for one or more tasks.
    Repair(RepairArgs),
    /// Score repair results.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Project root directory.
    pub project: PathBuf,
    /// Output database file.
    #[arg(long, value_name = "DB")]
    pub out: Option<PathBuf>,
    /// File extensions to index (repeatable or comma separated).
    #[arg(long = "ext", value_delimiter = ',', default_value = ".py")]
    pub extensions: Vec<String>,
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderChoice>,
    /// Vector dimension (local embedder default 512, remote default 1536).
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Project database.
    pub db: PathBuf,
    /// Repository-relative file to check.
    pub file: String,
    /// Candidate contents for FILE (default: the indexed text).
    #[arg(long, value_name = "PATH")]
    pub candidate: Option<PathBuf>,
    /// Only report diagnostics inside START-END (1-based, inclusive).
    #[arg(long, value_name = "START-END")]
    pub span: Option<String>,
    #[arg(long, value_enum)]
    pub checker: Option<CheckerArg>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["text", "for_error"])))]
pub struct QueryArgs {
    /// Project database.
    pub db: PathBuf,
    /// Query text, e.g. "FROM Module m SELECT m".
    #[arg(long)]
    pub text: Option<String>,
    /// Diagnostic JSON file; uses the table lookup or synthesizes a query.
    #[arg(long, value_name = "DIAG_JSON")]
    pub for_error: Option<PathBuf>,
    /// Completion backend for query synthesis: remote or mock:<transcript>.
    #[arg(long)]
    pub backend: Option<String>,
    /// Source lines shown per result.
    #[arg(long, default_value_t = 40)]
    pub max_lines: usize,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// Project database.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Task file (repeatable).
    #[arg(long = "task")]
    pub tasks: Vec<PathBuf>,
    /// Completion backend: remote or mock:<transcript.json>.
    #[arg(long)]
    pub backend: Option<String>,
    /// Refinement rounds after the initial sample.
    #[arg(long)]
    pub max_iters: Option<u32>,
    /// Candidates sampled per task.
    #[arg(long)]
    pub n: Option<usize>,
    /// Entries retrieved per semantic query.
    #[arg(long)]
    pub retrieval_n: Option<usize>,
    /// Tasks repaired concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for traces and results.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub checker: Option<CheckerArg>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k: Option<u32>,
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    /// Prompt size limit in characters.
    #[arg(long)]
    pub prompt_budget: Option<usize>,
    /// Skip task test commands.
    #[arg(long)]
    pub no_tests: bool,
    /// Seconds allowed per test command.
    #[arg(long, default_value_t = 60)]
    pub test_timeout: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `repair`.
    #[arg(long)]
    pub results: PathBuf,
    /// Values of k for pass@k.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub k: Vec<u64>,
    /// Directory of reference solutions named <task_id>.py.
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Write the error distribution as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Write the JSON report here (default: <results>/report.json).
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CheckerArg {
    External,
    Builtin,
}

impl From<CheckerArg> for CheckerChoice {
    fn from(c: CheckerArg) -> Self {
        match c {
            CheckerArg::External => CheckerChoice::External,
            CheckerArg::Builtin => CheckerChoice::Builtin,
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("REPOFIX_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    match commands::run(&cli, &config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
