//! Command-line pipeline over `dilifilter-core`.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod exit;
pub mod pipeline;

pub use commands::{run, Cli};
pub use config::PipelineConfig;
pub use exit::exit_code;
