//! Experiment runner: configuration loading, the solve pipeline, report
//! files and named suites.

// NaN-rejecting guards read best as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod suites;

pub use config::{load_config, parse_config, Check, ExperimentConfig, Violation};
pub use error::CliError;
pub use report::emit_report;
pub use run::{run_experiment, Artifacts, RunOptions};
pub use suites::suite;
