//! Command-line front end: configuration, orchestration and output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

pub use error::{CliError, CliResult};
