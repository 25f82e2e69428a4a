//! Learned vs oracle vs random index policies on an N-arm instance.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::config::SimulationSettings;
use super::index::IndexReport;
use super::trace::format_value;
use super::ExperimentError;
use crate::oracle::{whittle_indices, DEFAULT_INDEX_TOLERANCE};
use crate::rmab_sim::{evaluate, truncation_horizon, Evaluation, PolicySpec, RmabInstance};
use crate::rng::RngStream;

pub const POLICY_HEADER: &str = "policy,mean,half_width,seeds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: String,
    pub evaluation: Evaluation,
}

/// Exact Whittle indices of every arm.
pub fn oracle_policy(instance: &RmabInstance) -> Result<PolicySpec, ExperimentError> {
    let table = instance
        .arms()
        .iter()
        .map(|arm| whittle_indices(arm, DEFAULT_INDEX_TOLERANCE).map(|w| w.index))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolicySpec::WhittleIndex(table))
}

/// Evaluates, in order: one `learned:<algorithm>` row per algorithm in
/// `learned` (seed-averaged indices, applied to every arm), `oracle`, and
/// `random`. All policies share the same replication streams.
pub fn compare_policies(
    instance: &RmabInstance,
    learned: Option<&IndexReport>,
    settings: &SimulationSettings,
    seed: u64,
) -> Result<Vec<PolicyRow>, ExperimentError> {
    let mut policies: Vec<(String, PolicySpec)> = Vec::new();
    if let Some(report) = learned {
        for algorithm in report.algorithms() {
            let lambda = report.mean_lambda(algorithm).expect("algorithm has runs");
            let table = vec![lambda; instance.num_arms()];
            policies.push((format!("learned:{algorithm}"), PolicySpec::WhittleIndex(table)));
        }
    }
    policies.push(("oracle".into(), oracle_policy(instance)?));
    policies.push(("random".into(), PolicySpec::RandomM));
    evaluate_policies(instance, &policies, settings, seed)
}

/// Evaluates named policies with shared replication streams, horizon from
/// the truncation bound.
pub fn evaluate_policies(
    instance: &RmabInstance,
    policies: &[(String, PolicySpec)],
    settings: &SimulationSettings,
    seed: u64,
) -> Result<Vec<PolicyRow>, ExperimentError> {
    if settings.replications == 0 {
        return Err(ExperimentError::Config("simulation replications must be at least 1".into()));
    }
    let horizon = truncation_horizon(instance.discount(), instance.max_abs_reward(), settings.tolerance);
    let rng = RngStream::new(seed);
    policies
        .iter()
        .map(|(name, spec)| {
            Ok(PolicyRow {
                policy: name.clone(),
                evaluation: evaluate(instance, spec, horizon, settings.replications, &rng)?,
            })
        })
        .collect()
}

/// `policy,mean,half_width,seeds`, where `seeds` is the number of
/// independent replication streams.
pub fn write_policy_csv<W: Write>(mut out: W, config_json: &str, rows: &[PolicyRow]) -> io::Result<()> {
    writeln!(out, "# config={config_json}")?;
    writeln!(out, "{POLICY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.policy,
            format_value(r.evaluation.mean),
            format_value(r.evaluation.half_width),
            r.evaluation.replications
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentConfig;
    use crate::experiment::IndexRunSummary;
    use crate::mdp::five_state_example;

    fn settings(replications: usize) -> SimulationSettings {
        SimulationSettings {
            replications,
            ..SimulationSettings::default()
        }
    }

    fn report_with(lambda: Vec<f64>) -> IndexReport {
        let config = ExperimentConfig::preset("desk-ci").unwrap();
        IndexReport {
            runs: vec![IndexRunSummary {
                algorithm: config.algorithms[0],
                seed: 0,
                lambda,
                converged: false,
                phases: 1,
                max_abs_error: 0.0,
            }],
            config,
            oracle: vec![0.0; 5],
            csv: "x.csv".into(),
        }
    }

    #[test]
    fn zero_replications_are_rejected() {
        let inst = RmabInstance::homogeneous(&five_state_example(), 5, 1).unwrap();
        assert!(compare_policies(&inst, None, &settings(0), 0).is_err());
    }

    #[test]
    fn oracle_copy_matches_oracle_row_exactly() {
        let env = five_state_example();
        let inst = RmabInstance::homogeneous(&env, 3, 1).unwrap();
        let oracle = whittle_indices(&env, DEFAULT_INDEX_TOLERANCE).unwrap().index;
        let rows = compare_policies(&inst, Some(&report_with(oracle)), &settings(50), 9).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(names, vec!["learned:ql-eps-greedy", "oracle", "random"]);
        assert_eq!(rows[0].evaluation, rows[1].evaluation);
    }

    #[test]
    fn csv_has_one_row_per_policy() {
        let inst = RmabInstance::homogeneous(&five_state_example(), 3, 1).unwrap();
        let rows = compare_policies(&inst, None, &settings(20), 1).unwrap();
        let mut buf = Vec::new();
        write_policy_csv(&mut buf, "{}", &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], POLICY_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("random,"));
        assert!(lines[3].ends_with(",20"));
    }
}
