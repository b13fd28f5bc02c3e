//! Experiment runner for attention-based multiple instance learning with
//! kernel self-attention. See README.md for the config format.

mod artifacts;
mod commands;
mod config;
mod error;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "milsa",
    about = "Train and evaluate attention-pooling MIL models on bag datasets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the cross-validation protocol described by a config file.
    Run {
        /// Path to the TOML experiment config.
        config: PathBuf,
    },
    /// Export per-bag attention weights and self-attention maps as JSON.
    DumpAttention {
        /// checkpoint.json written by `run` (the .bin sits next to it).
        checkpoint: PathBuf,
        /// manifest.json describing the bags to evaluate.
        bags: PathBuf,
        /// Output JSON path.
        out: PathBuf,
    },
    /// Summarize several completed runs into one AUC comparison CSV.
    Compare {
        /// Two or more run output directories.
        #[arg(num_args = 2.., required = true)]
        dirs: Vec<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => runner::run(config),
        Command::DumpAttention {
            checkpoint,
            bags,
            out,
        } => commands::dump_attention(checkpoint, bags, out),
        Command::Compare { dirs, out } => commands::compare(dirs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
