//! Experiment driver: configuration, media, sources, metrics, sweeps and
//! file output.

pub mod check;
pub mod config;
pub mod experiment;
pub mod field_file;
pub mod fields;
pub mod medium;
pub mod metrics;
pub mod source;
pub mod vtk;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, write_outputs, ExperimentOutput, SweepRow};
