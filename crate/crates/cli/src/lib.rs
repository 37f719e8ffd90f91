//! Command-line driver: configuration, execution and result files.

pub mod args;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use args::{build_config, Cli};
pub use config::RunConfig;
pub use error::CliError;
pub use output::RunResult;
pub use run::{execute, run};
