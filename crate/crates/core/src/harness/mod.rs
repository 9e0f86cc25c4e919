//! Experiment configuration, named presets, replicated runs and output files.

pub mod config;
pub mod experiment;
pub mod presets;

pub use config::{ExperimentConfig, Instance};
pub use experiment::{emit_outputs, run_experiment, ExperimentResult};
pub use presets::{AlgorithmSpec, Preset};
