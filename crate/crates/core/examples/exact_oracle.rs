//! Exact solutions on the bundled arm: Q* by value iteration, the value of
//! its greedy policy by a linear solve, and Whittle indices by bisection.
//!
//! ```bash
//! cargo run -p rmab-learn --example exact_oracle
//! ```

use rmab_learn::oracle::{action_gap, bellman_residual};
use rmab_learn::{five_state_example, policy_value, solve_q, whittle_indices};

fn main() {
    let mdp = five_state_example();
    let sol = solve_q(&mdp, 0.0, 1e-10).expect("value iteration converges");
    println!("value iteration: {} sweeps, residual {:.2e}", sol.iterations, sol.residual);

    let policy = sol.q.greedy_policy();
    let exact = policy_value(&mdp, &policy, 0.0).expect("nonsingular system");
    println!("{:>5} {:>10} {:>10} {:>7} {:>12}", "state", "Q(s,0)", "Q(s,1)", "greedy", "V^greedy");
    for s in 0..mdp.num_states {
        println!(
            "{:>5} {:>10.6} {:>10.6} {:>7} {:>12.6}",
            s,
            sol.q.get(s, 0),
            sol.q.get(s, 1),
            policy[s],
            exact[s]
        );
    }
    println!("residual check: {:.2e}", bellman_residual(&mdp, &sol.q, 0.0));

    let w = whittle_indices(&mdp, 1e-8).expect("fixture is indexable");
    println!("\nWhittle indices (gap Q(s,1) - Q(s,0) at the index should be ~0):");
    for (s, &lambda) in w.index.iter().enumerate() {
        let gap = action_gap(&mdp, s, lambda, 1e-10).expect("solver converges");
        println!("  state {s}: λ = {lambda:+.6}, gap {gap:+.1e}");
    }
}
