//! Single-arm learner comparison: `e_n = mean |Q_n − Q*|` over time.

use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ExperimentConfig};
use super::trace::{io_error, TraceWriter};
use super::{prepare_outputs, recorded, write_json, ExperimentError, ORACLE_TOLERANCE};
use crate::episode::Episode;
use crate::learners::LearnerState;
use crate::mdp::TabularMdp;
use crate::oracle::solve_q;
use crate::qtable::QTable;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub algorithm: AlgorithmSpec,
    pub seed: u64,
    /// `(n, e_n)` at the recorded iterations.
    pub points: Vec<(u64, f64)>,
    pub final_error: f64,
}

impl ErrorSeries {
    pub fn at(&self, iteration: u64) -> Option<f64> {
        self.points
            .binary_search_by_key(&iteration, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }
}

#[derive(Debug, Clone)]
pub struct SingleMdpResult {
    pub q_star: QTable,
    pub oracle_residual: f64,
    /// Config order: algorithm-major, then seed.
    pub series: Vec<ErrorSeries>,
}

impl SingleMdpResult {
    pub fn for_algorithm(&self, algorithm: AlgorithmSpec) -> impl Iterator<Item = &ErrorSeries> {
        self.series.iter().filter(move |s| s.algorithm == algorithm)
    }

    /// Seed-averaged final error.
    pub fn mean_final_error(&self, algorithm: AlgorithmSpec) -> f64 {
        mean(self.for_algorithm(algorithm).map(|s| s.final_error))
    }

    /// Seed-averaged `e_n`, if `n` was recorded.
    pub fn mean_error_at(&self, algorithm: AlgorithmSpec, n: u64) -> Option<f64> {
        let values: Option<Vec<f64>> = self.for_algorithm(algorithm).map(|s| s.at(n)).collect();
        values.filter(|v| !v.is_empty()).map(|v| mean(v.into_iter()))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Runs every (algorithm, seed) job in memory.
pub fn single_mdp_series(cfg: &ExperimentConfig) -> Result<SingleMdpResult, ExperimentError> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let oracle = solve_q(&env, 0.0, ORACLE_TOLERANCE)?;
    let jobs: Vec<(AlgorithmSpec, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let series = jobs
        .into_par_iter()
        .map(|(algorithm, seed)| run_job(cfg, &env, &oracle.q, algorithm, seed))
        .collect();
    Ok(SingleMdpResult {
        q_star: oracle.q,
        oracle_residual: oracle.residual,
        series,
    })
}

fn run_job(cfg: &ExperimentConfig, env: &TabularMdp, q_star: &QTable, algorithm: AlgorithmSpec, seed: u64) -> ErrorSeries {
    let learner = cfg.learner_for(algorithm, env);
    let policy = cfg.policy(algorithm.exploration);
    let mut rng = RngStream::new(seed);
    let mut state = LearnerState::new(&learner, env.num_states, env.num_actions);
    let start = rng.random_range(0..env.num_states);
    let t_max = cfg.hyper.t_max;
    let mut points = Vec::with_capacity((t_max / cfg.cadence + 1) as usize);
    let mut n = 0;
    Episode::new(env, &learner, &policy).run(&mut state, start, t_max, &mut rng, |st| {
        n += 1;
        if recorded(n, t_max, cfg.cadence) {
            points.push((n, st.q.mean_abs_diff(q_star)));
        }
    });
    ErrorSeries {
        algorithm,
        seed,
        points,
        final_error: state.q.mean_abs_diff(q_star),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: AlgorithmSpec,
    pub final_mean_error: f64,
    pub final_error_by_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleMdpSummary {
    pub config: ExperimentConfig,
    pub q_star: Vec<Vec<f64>>,
    pub oracle_residual: f64,
    pub algorithms: Vec<AlgorithmSummary>,
    pub csv: PathBuf,
}

/// Runs the experiment and writes `<experiment>.csv` and
/// `<experiment>_summary.json` under the output directory.
pub fn run_single_mdp(cfg: &ExperimentConfig, force: bool) -> Result<SingleMdpSummary, ExperimentError> {
    cfg.validate()?;
    let csv = cfg.output_dir.join(format!("{}.csv", cfg.experiment));
    let json = cfg.output_dir.join(format!("{}_summary.json", cfg.experiment));
    prepare_outputs(&cfg.output_dir, &[&csv, &json], force)?;

    let result = single_mdp_series(cfg)?;
    let mut writer = TraceWriter::create(&csv, &cfg.experiment, &cfg.to_json())?;
    for s in &result.series {
        let id = s.algorithm.to_string();
        for &(n, e) in &s.points {
            writer.row(&id, s.seed, n, "e_n", e).map_err(|e| io_error(&csv, e))?;
        }
    }
    writer.finish().map_err(|e| io_error(&csv, e))?;

    let summary = SingleMdpSummary {
        config: cfg.clone(),
        q_star: result.q_star.to_rows(),
        oracle_residual: result.oracle_residual,
        algorithms: cfg
            .algorithms
            .iter()
            .map(|&a| AlgorithmSummary {
                algorithm: a,
                final_mean_error: result.mean_final_error(a),
                final_error_by_seed: result.for_algorithm(a).map(|s| s.final_error).collect(),
            })
            .collect(),
        csv,
    };
    write_json(&json, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("desk-ci").unwrap();
        cfg.hyper.t_max = 300;
        cfg.seeds = vec![4];
        cfg
    }

    #[test]
    fn cadence_one_records_every_step() {
        let mut cfg = small();
        cfg.algorithms.truncate(1);
        let r = single_mdp_series(&cfg).unwrap();
        assert_eq!(r.series.len(), 1);
        assert_eq!(r.series[0].points.len(), 300);
        assert_eq!(r.series[0].points.last().unwrap().1, r.series[0].final_error);
    }

    #[test]
    fn errors_start_near_the_scale_of_q_star() {
        let r = single_mdp_series(&small()).unwrap();
        let scale = r.q_star.values().iter().map(|v| v.abs()).sum::<f64>() / 10.0;
        for s in &r.series {
            assert!(s.points[0].1 <= scale + 1e-9);
            assert!(s.final_error < s.points[0].1);
        }
    }

    #[test]
    fn series_are_reproducible() {
        let a = single_mdp_series(&small()).unwrap();
        let b = single_mdp_series(&small()).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn files_are_written_once_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small().with_output_dir(dir.path());
        let summary = run_single_mdp(&cfg, false).unwrap();
        assert_eq!(summary.algorithms.len(), 2);
        let text = std::fs::read_to_string(&summary.csv).unwrap();
        assert_eq!(text.lines().count(), 2 + 2 * 300);
        assert_eq!(run_single_mdp(&cfg, false).unwrap_err().kind(), "output-exists");
        run_single_mdp(&cfg, true).unwrap();
        assert_eq!(std::fs::read_to_string(&summary.csv).unwrap(), text);
    }
}
