//! Experiment runner behind the `dphase-eig` binary.

mod config;
mod run;

pub use config::{ExperimentConfig, Overrides, Task, TaskOptions, NONEXISTENCE_MULTIPLIERS};
pub use run::{run, InvariantEntry, RunReport, CSV_VERSION, TAIL_WARNING};
