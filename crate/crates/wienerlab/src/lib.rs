//! Experiment driver around `wienerlab-core`: configuration, file formats,
//! synthetic data, metrics and the `wienerlab` subcommands.

pub mod config;
pub mod digits;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod metrics;
pub mod run;

pub use error::{LabError, LabResult};
