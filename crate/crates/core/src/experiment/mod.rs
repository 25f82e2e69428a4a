//! Config-driven experiments that write self-describing CSV and JSON files.
//!
//! - [`run_single_mdp`]: error-to-Q* traces for each algorithm and seed.
//! - [`run_index_learning`]: per-phase traces and learned indices.
//! - [`compare_policies`]: Monte-Carlo comparison of learned, oracle and random policies.
//!
//! Jobs run in parallel; output is assembled in config order, so files are
//! byte-identical across runs and thread counts.

mod compare;
mod config;
mod index;
mod single_mdp;
pub mod trace;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use compare::{compare_policies, evaluate_policies, oracle_policy, write_policy_csv, PolicyRow, POLICY_HEADER};
pub use config::{AlgorithmSpec, ExperimentConfig, Hyperparameters, SimulationSettings, PRESET_NAMES, SCHEMA};
pub use index::{index_learning_runs, run_index_learning, write_index_learning_result, IndexLearningResult, IndexReport, IndexRun, IndexRunSummary};
pub use single_mdp::{run_single_mdp, single_mdp_series, AlgorithmSummary, ErrorSeries, SingleMdpResult, SingleMdpSummary};
pub use trace::{TraceRecord, TraceWriter};

use crate::index_learning::IndexLearnError;
use crate::mdp::MdpError;
use crate::oracle::OracleError;
use crate::rmab_sim::SimError;

/// Oracle tolerance for Q* and the reference indices.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] MdpError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Learning(#[from] IndexLearnError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{} already exists; pass --force to overwrite", .0.display())]
    OutputExists(PathBuf),
    #[error("index file {0} is missing or unreadable")]
    MissingIndex(String),
}

impl ExperimentError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Io(_) => "io",
            ExperimentError::Parse(_) => "parse",
            ExperimentError::Config(_) => "config",
            ExperimentError::Model(MdpError::Io(_)) => "io",
            ExperimentError::Model(MdpError::Parse(_)) => "parse",
            ExperimentError::Model(_) => "invalid-model",
            ExperimentError::Oracle(_) => "oracle",
            ExperimentError::Learning(_) => "learning",
            ExperimentError::Simulation(SimError::Io(_)) => "io",
            ExperimentError::Simulation(SimError::Parse(_)) => "parse",
            ExperimentError::Simulation(_) => "simulation",
            ExperimentError::OutputExists(_) => "output-exists",
            ExperimentError::MissingIndex(_) => "missing-index",
        }
    }
}

/// Creates `dir` and checks that none of `files` exists unless `force`.
pub(crate) fn prepare_outputs(dir: &Path, files: &[&Path], force: bool) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| trace::io_error(dir, e))?;
    if !force {
        if let Some(existing) = files.iter().find(|p| p.exists()) {
            return Err(ExperimentError::OutputExists(existing.to_path_buf()));
        }
    }
    Ok(())
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| trace::io_error(path, e))
}

/// Whether iteration `n` of `last` is recorded at `cadence`.
pub(crate) fn recorded(n: u64, last: u64, cadence: u64) -> bool {
    n % cadence == 0 || n == last
}
