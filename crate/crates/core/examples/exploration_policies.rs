//! Empirical behaviour of ε-greedy and UCB selection on a fixed Q row.
//!
//! ```bash
//! cargo run -p rmab-learn --example exploration_policies
//! ```

use rmab_learn::exploration::{select_eps_greedy, select_ucb};
use rmab_learn::{QTable, RngStream};

fn main() {
    let q = QTable::from_rows(&[vec![1.0, 1.5]]);
    let mut rng = RngStream::new(7);
    let draws = 100_000;
    for eps in [0.0, 0.3, 1.0] {
        let greedy = (0..draws).filter(|_| select_eps_greedy(&q, 0, eps, &mut rng) == 1).count();
        println!(
            "ε = {eps:.1}: greedy action {:.4} of draws (expected {:.4})",
            greedy as f64 / draws as f64,
            1.0 - eps + eps / 2.0
        );
    }

    println!("\nUCB with c = 2 on Q = (1.0, 1.5):");
    for (counts, n) in [([0u64, 0], 0u64), ([1, 50], 51), ([2, 200], 202), ([10, 10], 20)] {
        println!("  N = {counts:?}, n = {n:>3} -> action {}", select_ucb(&q, 0, &counts, n, 2.0));
    }
}
