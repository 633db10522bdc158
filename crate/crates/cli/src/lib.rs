//! Front end for the `qcollide` binary: experiment files, CSV and SVG output.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
