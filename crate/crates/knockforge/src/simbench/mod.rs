//! Seeded simulation harness: generators, configuration, runner and presets.

pub mod config;
pub mod generators;
pub mod presets;
pub mod runner;

pub use config::{ExperimentConfig, FilterSpec, GeneratorSpec, InnerSpec, MethodSpec, PlanSpec, ResponseSpec};
pub use runner::{resolve_threads, run_experiment, Aggregate, ExperimentSummary, ReplicateRecord, THREADS_ENV};
