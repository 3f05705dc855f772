//! Experiment harness behind the `pihqcd` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use experiments::run;
