//! `confsample`: scan C sources, sample configurations, evaluate samples
//! against a fault corpus.

mod commands;
mod project;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for a run that finished but reported scan diagnostics.
pub const EXIT_DIAGNOSTICS: u8 = 2;
/// Exit status when an algorithm cannot run at the requested scale.
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "confsample", version, about = "Configuration sampling for C preprocessor variability")]
struct Cli {
    /// Worker threads for per-file work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ScanOpts {
    /// Project root; every `.c` file below it is scanned.
    pub root: PathBuf,
    /// Follow `#include`s and add header conditionals to the option space.
    #[arg(long)]
    pub headers: bool,
    /// Extra include directory (repeatable); the root is always searched.
    #[arg(long = "include", short = 'I')]
    pub include_paths: Vec<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub header_depth: usize,
    /// `path :: formula` lines giving each file's build condition.
    #[arg(long)]
    pub build_manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract conditional blocks and presence conditions.
    Scan {
        #[command(flatten)]
        scan: ScanOpts,
        /// Write one JSON model per source file below this directory.
        #[arg(long)]
        emit_model: Option<PathBuf>,
    },
    /// Select configurations with one or more sampling algorithms.
    Sample(commands::SampleArgs),
    /// Score sample sets against a fault corpus.
    Evaluate(commands::EvaluateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Scan { scan, emit_model } => commands::scan(&scan, emit_model.as_deref()),
        Command::Sample(args) => commands::sample(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
