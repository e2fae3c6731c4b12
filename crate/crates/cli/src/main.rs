use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use grassfire_cli::{configure_threads, parse_thread_cap, run, Command, THREADS_ENV};

/// Grassmannian persistent homology for hyperspectral movies.
#[derive(Debug, Parser)]
#[command(name = "grassfire", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file, or `bundled:<name>` for a shipped scenario.
    #[arg(long)]
    config: String,
    /// Output directory (overrides `output_dir` in the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = parse_thread_cap(std::env::var(THREADS_ENV).ok().as_deref())
        .and_then(configure_threads)
        .and_then(|()| run(args.command, &args.config, args.out.as_deref()));
    match result {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            for name in &outcome.artifacts {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
