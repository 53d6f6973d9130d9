//! Command-line driver for the corpusforge toolkit.

mod cmd;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "corpusforge", version, about = "Corpus curation and model merging toolkit")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML file holding the subcommand's settings; flags given on the
    /// command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: cmd::Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let globals = Globals {
        seed: cli.seed,
        config: cli.config,
        report: cli.report,
    };
    match cmd::run(cli.command, &globals) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
