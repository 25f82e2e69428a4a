//! Five copies of the bundled arm, one play per slot: the exact Whittle
//! index policy against uniformly random plays.
//!
//! ```bash
//! cargo run -p rmab-learn --example simulate_rmab -- [replications]
//! ```

use rmab_learn::rmab_sim::{evaluate, truncation_horizon};
use rmab_learn::{five_state_example, whittle_indices, PolicySpec, RmabInstance, RngStream};

fn main() {
    let replications: usize = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("count"));
    let arm = five_state_example();
    let instance = RmabInstance::homogeneous(&arm, 5, 1).expect("valid instance");
    let horizon = truncation_horizon(instance.discount(), instance.max_abs_reward(), 1e-3);
    let index = whittle_indices(&arm, 1e-8).expect("indexable").index;
    let rng = RngStream::new(2024);

    println!("horizon {horizon}, {replications} replications");
    for (name, policy) in [
        ("whittle", PolicySpec::WhittleIndex(vec![index; 5])),
        ("random", PolicySpec::RandomM),
        ("always arm 0", PolicySpec::FixedSet(vec![0])),
    ] {
        let e = evaluate(&instance, &policy, horizon, replications, &rng).expect("valid policy");
        println!("{name:>13}: {:.4} ± {:.4}", e.mean, e.half_width);
    }
}
