//! Experiment runner for `wlry-core`: TOML configuration, CSV tables,
//! binary snapshots and the `wlry` command-line tool.

pub mod config;
pub mod csv;
pub mod error;
pub mod experiment;
pub mod snapshot;

pub use config::{emit_config, load_config, parse_config, ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use experiment::{output_dir, run_experiment, Check, RunReport, Summary};
pub use snapshot::Snapshot;
