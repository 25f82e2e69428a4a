//! Index-learning experiments: per-phase traces and learned indices next to
//! the exact bisection indices.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ExperimentConfig};
use super::trace::{io_error, TraceWriter};
use super::{prepare_outputs, recorded, write_json, ExperimentError};
use crate::index_learning::{self, PhaseRecord};
use crate::oracle::{whittle_indices, DEFAULT_INDEX_TOLERANCE};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRun {
    pub algorithm: AlgorithmSpec,
    pub seed: u64,
    pub lambda: Vec<f64>,
    pub converged: bool,
    pub trace: Vec<PhaseRecord>,
}

impl IndexRun {
    pub fn max_abs_error(&self, oracle: &[f64]) -> f64 {
        self.lambda
            .iter()
            .zip(oracle)
            .map(|(l, o)| (l - o).abs())
            .fold(0.0, f64::max)
    }

    /// Mean `E_k` over the first and the last quarter of the phases.
    pub fn quarter_means(&self) -> (f64, f64) {
        let n = self.trace.len();
        let q = (n / 4).max(1);
        let mean = |r: &[PhaseRecord]| r.iter().map(|p| p.mean_abs_gap).sum::<f64>() / r.len() as f64;
        (mean(&self.trace[..q]), mean(&self.trace[n - q..]))
    }
}

#[derive(Debug, Clone)]
pub struct IndexLearningResult {
    pub oracle: Vec<f64>,
    /// Config order: algorithm-major, then seed.
    pub runs: Vec<IndexRun>,
}

impl IndexLearningResult {
    pub fn for_algorithm(&self, algorithm: AlgorithmSpec) -> impl Iterator<Item = &IndexRun> {
        self.runs.iter().filter(move |r| r.algorithm == algorithm)
    }
}

/// Runs every (algorithm, seed) job in memory.
pub fn index_learning_runs(cfg: &ExperimentConfig) -> Result<IndexLearningResult, ExperimentError> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let oracle = whittle_indices(&env, DEFAULT_INDEX_TOLERANCE)?.index;
    let jobs: Vec<(AlgorithmSpec, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(algorithm, seed)| {
            let out = index_learning::run(&env, &cfg.index_config(algorithm, &env), &RngStream::new(seed))?;
            Ok(IndexRun {
                algorithm,
                seed,
                lambda: out.lambda,
                converged: out.converged,
                trace: out.trace,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(IndexLearningResult { oracle, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRunSummary {
    pub algorithm: AlgorithmSpec,
    pub seed: u64,
    pub lambda: Vec<f64>,
    pub converged: bool,
    pub phases: usize,
    pub max_abs_error: f64,
}

/// Contents of `<experiment>_indices.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub config: ExperimentConfig,
    pub oracle: Vec<f64>,
    pub runs: Vec<IndexRunSummary>,
    pub csv: PathBuf,
}

impl IndexReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::MissingIndex(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Parse(format!("{}: {e}", path.display())))
    }

    /// Algorithms in report order.
    pub fn algorithms(&self) -> Vec<AlgorithmSpec> {
        let mut out: Vec<AlgorithmSpec> = Vec::new();
        for r in &self.runs {
            if !out.contains(&r.algorithm) {
                out.push(r.algorithm);
            }
        }
        out
    }

    /// Per-state learned index averaged over seeds.
    pub fn mean_lambda(&self, algorithm: AlgorithmSpec) -> Option<Vec<f64>> {
        let runs: Vec<&IndexRunSummary> = self.runs.iter().filter(|r| r.algorithm == algorithm).collect();
        let first = runs.first()?;
        let mut sum = vec![0.0; first.lambda.len()];
        for r in &runs {
            for (acc, l) in sum.iter_mut().zip(&r.lambda) {
                *acc += l;
            }
        }
        Some(sum.into_iter().map(|s| s / runs.len() as f64).collect())
    }
}

/// Runs the experiment and writes `<experiment>.csv` and
/// `<experiment>_indices.json` under the output directory.
///
/// Trace rows per recorded phase `k`: `E_k`, then `lambda[s]` (subsidy used
/// in the phase) and `action_gap[s]` for every threshold state.
pub fn run_index_learning(cfg: &ExperimentConfig, force: bool) -> Result<IndexReport, ExperimentError> {
    cfg.validate()?;
    let csv = cfg.output_dir.join(format!("{}.csv", cfg.experiment));
    let json = cfg.output_dir.join(format!("{}_indices.json", cfg.experiment));
    prepare_outputs(&cfg.output_dir, &[&csv, &json], force)?;
    let result = index_learning_runs(cfg)?;
    write_index_learning(cfg, result, &csv, &json)
}

/// Writes an already computed result to the files `run_index_learning`
/// would produce, replacing any existing ones.
pub fn write_index_learning_result(
    cfg: &ExperimentConfig,
    result: IndexLearningResult,
) -> Result<IndexReport, ExperimentError> {
    let csv = cfg.output_dir.join(format!("{}.csv", cfg.experiment));
    let json = cfg.output_dir.join(format!("{}_indices.json", cfg.experiment));
    prepare_outputs(&cfg.output_dir, &[&csv, &json], true)?;
    write_index_learning(cfg, result, &csv, &json)
}

fn write_index_learning(
    cfg: &ExperimentConfig,
    result: IndexLearningResult,
    csv: &Path,
    json: &Path,
) -> Result<IndexReport, ExperimentError> {
    let mut writer = TraceWriter::create(csv, &cfg.experiment, &cfg.to_json())?;
    for run in &result.runs {
        let id = run.algorithm.to_string();
        let last = run.trace.len() as u64 - 1;
        for rec in &run.trace {
            let k = rec.phase as u64;
            if recorded(k, last, cfg.cadence) {
                write_phase(&mut writer, &id, run.seed, rec).map_err(|e| io_error(csv, e))?;
            }
        }
    }
    writer.finish().map_err(|e| io_error(csv, e))?;

    let report = IndexReport {
        config: cfg.clone(),
        runs: result
            .runs
            .iter()
            .map(|r| IndexRunSummary {
                algorithm: r.algorithm,
                seed: r.seed,
                lambda: r.lambda.clone(),
                converged: r.converged,
                phases: r.trace.len(),
                max_abs_error: r.max_abs_error(&result.oracle),
            })
            .collect(),
        oracle: result.oracle,
        csv: csv.to_path_buf(),
    };
    write_json(json, &report)?;
    Ok(report)
}

fn write_phase<W: Write>(writer: &mut TraceWriter<W>, id: &str, seed: u64, rec: &PhaseRecord) -> io::Result<()> {
    let k = rec.phase as u64;
    writer.row(id, seed, k, "E_k", rec.mean_abs_gap)?;
    for (s, l) in rec.lambda.iter().enumerate() {
        writer.row(id, seed, k, &format!("lambda[{s}]"), *l)?;
    }
    for (s, g) in rec.gaps.iter().enumerate() {
        writer.row(id, seed, k, &format!("action_gap[{s}]"), *g)?;
    }
    Ok(())
}
