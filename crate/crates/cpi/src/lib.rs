//! File formats, configuration, pipelines and command implementations for
//! the `cpi` command-line tool.

pub mod bench;
pub mod commands;
pub mod config;
pub mod format;
pub mod pipeline;
pub mod report;

pub use commands::CliError;
pub use config::{LoadedConfig, RunConfig};
pub use report::Report;
