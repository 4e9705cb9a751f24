//! Config parsing and the table, comparison and scaling runs behind the
//! `powersim` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{PolicyEntry, RunConfig, TraceSource};
pub use error::{CliError, Result};
