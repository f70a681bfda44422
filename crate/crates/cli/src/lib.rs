//! Command-line orchestration: configuration, CSV I/O, manifests and the
//! `simulate` / `fit` / `summarize` / `crossval` / `validate` commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use args::run_from;
pub use config::{strip_timing, Manifest, RunConfig, MANIFEST_FILE};
pub use error::{CliError, Result};
