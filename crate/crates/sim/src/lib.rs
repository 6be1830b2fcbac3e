//! Figure pipelines for the HODM simulator: config parsing, the seven
//! experiments, and CSV curve output.

pub mod artifact;
pub mod config;
pub mod experiments;

pub use artifact::CurveArtifact;
pub use config::{Axis, ConfigError, ExperimentConfig};
pub use experiments::{Experiment, RunError};
