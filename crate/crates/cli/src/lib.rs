//! Configuration, orchestration and serialization for the `pressure` tool.

// `!(x > 0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, RunOutcome};
pub use config::{LoadedConfig, RunConfig};
pub use error::CliError;
