//! Learns Whittle indices of the bundled five-state arm with the two-timescale
//! scheme and compares them with the exact bisection indices.
//!
//! ```bash
//! cargo run -p rmab-learn --example index_learning -- [variant] [eps-greedy|ucb] [t_max] [k_max] [seed]
//! ```
//!
//! Defaults to QL with ε-greedy, `t_max = 2000`, `k_max = 300`.

use std::time::Instant;

use rmab_learn::index_learning::{self, IndexLearnConfig};
use rmab_learn::exploration::DEFAULT_UCB_SCALE;
use rmab_learn::learners::default_relaxation;
use rmab_learn::{five_state_example, whittle_indices, EePolicyConfig, ExplorationKind, LearnerConfig, RngStream, Variant};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: Variant = args.first().map_or(Ok(Variant::Ql), |s| s.parse()).expect("variant");
    let kind: ExplorationKind = args
        .get(1)
        .map_or(Ok(ExplorationKind::EpsGreedy), |s| s.parse())
        .expect("exploration");
    let t_max: u64 = args.get(2).map_or(2000, |s| s.parse().expect("t_max"));
    let k_max: usize = args.get(3).map_or(300, |s| s.parse().expect("k_max"));
    let seed: u64 = args.get(4).map_or(0, |s| s.parse().expect("seed"));

    let env = five_state_example();
    let oracle = whittle_indices(&env, 1e-8).expect("fixture is indexable");
    let cfg = IndexLearnConfig {
        gamma: 0.005,
        delta: 1e-3,
        t_max,
        k_max,
        learner: LearnerConfig::new(variant, 0.02, env.discount)
            .with_relaxation(default_relaxation(&env))
            .with_samples(20),
        policy: match kind {
            ExplorationKind::EpsGreedy => EePolicyConfig::eps_greedy(0.3),
            ExplorationKind::Ucb => EePolicyConfig::ucb(DEFAULT_UCB_SCALE),
        },
    };

    let started = Instant::now();
    let out = index_learning::run(&env, &cfg, &RngStream::new(seed)).expect("valid config");
    let elapsed = started.elapsed();

    let quarter = (out.trace.len() / 4).max(1);
    let mean = |records: &[index_learning::PhaseRecord]| {
        records.iter().map(|r| r.mean_abs_gap).sum::<f64>() / records.len() as f64
    };
    println!(
        "{variant}/{} seed {seed}: {} phases in {:.2?} (converged: {})",
        kind.name(),
        out.phases,
        elapsed,
        out.converged
    );
    println!(
        "E_k first quarter {:.4}, last quarter {:.4}",
        mean(&out.trace[..quarter]),
        mean(&out.trace[out.trace.len() - quarter..])
    );
    println!("{:>5} {:>10} {:>10} {:>10}", "state", "learned", "oracle", "error");
    for s in 0..env.num_states {
        println!(
            "{:>5} {:>10.4} {:>10.4} {:>10.4}",
            s,
            out.lambda[s],
            oracle.index[s],
            (out.lambda[s] - oracle.index[s]).abs()
        );
    }
}
