//! Scenario files, subcommands and error reporting for the `mpms` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ScenarioConfig;
pub use error::{CliError, Result};
