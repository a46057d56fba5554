//! Experiment harness for MJP parameter inference: JSON configs, data
//! simulation and ingestion, parallel benchmark runs, CSV and SVG output.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ResultRow, RunOptions};
