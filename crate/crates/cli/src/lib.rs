//! Pipeline orchestration behind the `cgm` binary.

pub mod artifacts;
pub mod cli;
pub mod colormap;
pub mod config;
pub mod error;
pub mod harness;
pub mod pipeline;

pub use cli::{run, Cli, Command};
pub use config::PipelineConfig;
pub use error::CliError;
pub use pipeline::Context;
