//! Batch experiment runner for the `qmh-core` laboratory.

pub mod config;
pub mod error;
pub mod experiments;
pub mod model;
pub mod report;
pub mod scaling;
pub mod suite;

use std::path::{Path, PathBuf};

pub use config::{load_config, load_scaling, parse_config, ExperimentConfig, ExperimentId, Tolerances};
pub use error::{CliError, Result};
pub use experiments::run_experiment;
pub use report::{Check, ExperimentReport, Table};

/// Environment variable naming the output root.
pub const OUTPUT_ENV: &str = "QMH_LAB_OUT";
pub const DEFAULT_OUTPUT: &str = "qmh-lab-out";

/// `--out`, then `$QMH_LAB_OUT`, then `./qmh-lab-out`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
    }
}
