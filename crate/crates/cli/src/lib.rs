//! Configuration and orchestration behind the `qlockin` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, Experiment, RunConfig};
pub use run::{run, RunError, RunSummary, SeedSource};
