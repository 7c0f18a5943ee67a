//! Configuration schema and subcommands behind the `dml` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{parse_config, Command, RunConfig};
pub use error::CliError;
