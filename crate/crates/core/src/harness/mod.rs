//! Experiment front end: configuration, sweeps, reports, plots and the CLI.

pub mod cli;
pub mod config;
pub mod plot;
pub mod report;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use sweep::{
    aggregate, run_sweep, AggregateRow, SweepConfig, SweepReport, SweepRow, SweepSource,
    SweepVariable,
};
