//! Experiment driver for the `papr-core` library: configuration, seeded
//! Monte Carlo runs, experiment presets and CSV output.

pub mod config;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, MethodKind};
pub use error::LabError;
