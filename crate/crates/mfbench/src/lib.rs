//! Benchmark harness for the `mfcore` solvers: configs, figure presets,
//! trace/verdict CSVs and the subcommands behind the `mfbench` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod presets;
pub mod traceio;
pub mod verdict;

pub use commands::{BenchError, Grid};
pub use config::{ConfigError, ExperimentConfig, NoraExperiment};
