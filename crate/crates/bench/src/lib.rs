//! Experiment harness: configuration files, seeded runs of the
//! non-stationary algorithms, CSV traces, and summary statistics.

pub mod config;
pub mod experiment;
pub mod output;
pub mod summary;

pub use config::{load_config, ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, simulate, RunOutput};
pub use summary::{slope_estimate, SummaryStats, SweepSummary};
