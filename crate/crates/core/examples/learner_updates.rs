//! One update of each learner on the same transition, and exact-expectation
//! phase sweeps contracting toward Q*.
//!
//! ```bash
//! cargo run -p rmab-learn --example learner_updates
//! ```

use rmab_learn::learners::{phase_sweep_expected, NextValue};
use rmab_learn::{five_state_example, solve_q, LearnerConfig, LearnerState, QTable, Transition, Variant};

fn main() {
    let mdp = five_state_example();
    let t = Transition {
        state: 2,
        action: 1,
        reward: mdp.reward(2, 1),
        next_state: 2,
    };
    let start = QTable::filled(mdp.num_states, mdp.num_actions, 5.0);
    for variant in [Variant::Ql, Variant::Sql, Variant::Gsql] {
        let cfg = LearnerConfig::new(variant, 0.1, mdp.discount).with_relaxation(1.05);
        let mut st = LearnerState::with_initial(&cfg, start.clone());
        st.observe(&t, &cfg, NextValue::Max);
        st.observe(&t, &cfg, NextValue::Max);
        println!("{:>5}: Q(2,1) after two updates = {:.6}", variant.name(), st.q.get(2, 1));
    }

    let q_star = solve_q(&mdp, 0.0, 1e-12).expect("converges").q;
    let mut q = QTable::zeros(mdp.num_states, mdp.num_actions);
    let mut err = q.sup_diff(&q_star);
    println!("\nexact phase sweeps, sup error and contraction ratio:");
    for k in 1..=8 {
        q = phase_sweep_expected(&q, &mdp, 0.0);
        let next = q.sup_diff(&q_star);
        println!("  sweep {k}: {next:.6}  ratio {:.4}", next / err);
        err = next;
    }
}
