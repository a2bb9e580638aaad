//! Experiment runner: configuration, subcommand dispatch, result files and
//! the acceptance battery. The solver crates never touch the filesystem;
//! everything persisted goes through here.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run, Command};
