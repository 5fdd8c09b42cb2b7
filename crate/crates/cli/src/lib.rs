//! File formats and command implementations behind the `modfront` binary.

pub mod artifact;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod wav;

pub use error::{CliError, CliResult};
