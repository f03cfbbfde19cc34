//! Experiment harness for `dynbo-core`: TOML configuration, seeded parallel
//! sweeps, run-record files, summary and statistics tables, and plot data.

pub mod config;
pub mod error;
pub mod harness;
pub mod instance;
pub mod plotdata;
pub mod record;
pub mod report;

pub use config::{load_config, ExperimentConfig, ProblemConfig};
pub use error::HarnessError;
pub use harness::{run_experiment, ExperimentOutcome};
pub use plotdata::{emit_plot_data, PlotKind};
