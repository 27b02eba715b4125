//! Experiment runner for the EDNMR simulator.

pub mod config;
pub mod error;
pub mod plot;
pub mod run;
pub mod units;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use run::{run, Command};
