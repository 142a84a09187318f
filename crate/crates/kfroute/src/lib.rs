//! Experiment harness, file formats and command-line front end for
//! [`kfroute_core`].

pub mod config;
pub mod harness;
pub mod io;

pub use config::ExperimentConfig;
pub use harness::{run, run_experiment1, run_experiment2, RunRecord, RunSummary, SummaryRow};
