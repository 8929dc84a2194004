//! Experiment orchestration for the urnlab simulators: configuration
//! loading, parallel ensemble construction, verification tests, artifact
//! persistence, and plot-data export. The `urnlab` binary is a thin wrapper
//! over this library.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod plots;
pub mod runner;

pub use config::{ExperimentConfig, ResolvedExperiment, ResolvedModel, TestSpec};
pub use runner::{build_ensemble, run_tests, with_thread_pool, RunError, TestReport};
