//! Compares the four Q-learning variants under ε-greedy and UCB exploration
//! on the bundled five-state arm, reporting the mean absolute error to Q*.
//!
//! ```bash
//! cargo run -p rmab-learn --example q_learning_variants
//! ```

use rand::Rng;
use rmab_learn::exploration::DEFAULT_UCB_SCALE;
use rmab_learn::learners::default_relaxation;
use rmab_learn::{
    five_state_example, solve_q, EePolicyConfig, Episode, ExplorationKind, LearnerConfig, LearnerState, RngStream,
    Variant,
};

const STEPS: u64 = 30_000;
const SEEDS: u64 = 10;

fn main() {
    let env = five_state_example();
    let q_star = solve_q(&env, 0.0, 1e-10).expect("oracle converges").q;
    let w = default_relaxation(&env);
    println!("relaxation w = {w:.6}");
    println!("{:<10} {:<11} {:>10} {:>10} {:>10}", "variant", "policy", "e(100)", "e(T)", "ratio");

    for variant in Variant::ALL {
        for kind in [ExplorationKind::EpsGreedy, ExplorationKind::Ucb] {
            let learner = LearnerConfig::new(variant, 0.02, env.discount)
                .with_relaxation(w)
                .with_samples(20);
            let policy = match kind {
                ExplorationKind::EpsGreedy => EePolicyConfig::eps_greedy(0.3),
                ExplorationKind::Ucb => EePolicyConfig::ucb(DEFAULT_UCB_SCALE),
            };
            let (mut early, mut late) = (0.0, 0.0);
            for seed in 0..SEEDS {
                let mut rng = RngStream::new(seed);
                let mut state = LearnerState::new(&learner, env.num_states, env.num_actions);
                let start = rng.random_range(0..env.num_states);
                let mut n = 0;
                Episode::new(&env, &learner, &policy).run(&mut state, start, STEPS, &mut rng, |st| {
                    n += 1;
                    if n == 100 {
                        early += st.q.mean_abs_diff(&q_star);
                    }
                });
                late += state.q.mean_abs_diff(&q_star);
            }
            early /= SEEDS as f64;
            late /= SEEDS as f64;
            println!(
                "{:<10} {:<11} {:>10.4} {:>10.4} {:>10.4}",
                variant.name(),
                kind.name(),
                early,
                late,
                late / early
            );
        }
    }
}
