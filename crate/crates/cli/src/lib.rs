//! Command-line front end for the grassfire pipeline.
//!
//! Every subcommand takes a flat `key = value` configuration (see
//! [`settings`]) and an output directory, and writes plain files: HSCB
//! movies, CSV matrices and barcodes, text component reports, SVG plots and
//! a manifest of content hashes.

pub mod commands;
pub mod error;
pub mod plot;
pub mod report;
pub mod settings;

use std::path::Path;

use clap::ValueEnum;
use grassfire::Error;

pub use commands::Outcome;
pub use error::{CliError, CliResult};
pub use settings::PipelineConfig;

use error::StageExt;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GRASSFIRE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Generate a synthetic plume movie and its mask.
    Synth,
    /// Embed a patch or window series and write its distance matrix.
    Embed,
    /// Compute the barcode and component reports of a distance matrix.
    Persist,
    /// Run the ACE detector on every frame.
    Ace,
    /// Render a barcode as SVG.
    Plot,
    /// Run every stage and write a manifest.
    Pipeline,
}

/// Loads the configuration (`path` or `bundled:<name>`) and runs `command`.
pub fn run(command: Command, config: &str, out: Option<&Path>) -> CliResult<Outcome> {
    let cfg = PipelineConfig::load(config, out).stage(error::STAGE_CONFIG)?;
    match command {
        Command::Synth => commands::synth(&cfg),
        Command::Embed => commands::embed_series(&cfg),
        Command::Persist => commands::persist(&cfg),
        Command::Ace => commands::ace(&cfg),
        Command::Plot => commands::plot(&cfg),
        Command::Pipeline => commands::pipeline(&cfg),
    }
}

/// Parses the thread cap; `None` or empty means "use the default".
pub fn parse_thread_cap(value: Option<&str>) -> CliResult<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::at(
                error::STAGE_CONFIG,
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                )),
            )),
        },
    }
}

/// Sizes the global worker pool. Without the `parallel` feature everything
/// runs on the calling thread and the cap is only validated.
pub fn configure_threads(cap: Option<usize>) -> CliResult<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cap {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| {
                CliError::at(
                    error::STAGE_CONFIG,
                    Error::Config(format!("cannot size the worker pool: {e}")),
                )
            })?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cap;
    Ok(())
}
