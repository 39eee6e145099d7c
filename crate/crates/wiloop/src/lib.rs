//! Command-line front end: experiment files, parallel execution of the core
//! job lists, and CSV/plot output.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;

pub use error::{CliError, Result};
