//! Loads an arm fixture, validates it, and shows how a broken kernel is reported.
//!
//! ```bash
//! cargo run -p rmab-learn --example validate_fixture -- [fixture.json]
//! ```

use rmab_learn::mdp::MdpError;
use rmab_learn::{five_state_example, TabularMdp};

fn main() -> Result<(), MdpError> {
    let mdp = match std::env::args().nth(1) {
        Some(path) => TabularMdp::load(path)?,
        None => five_state_example(),
    };
    println!(
        "{} states, {} actions, discount {}",
        mdp.num_states, mdp.num_actions, mdp.discount
    );
    println!(
        "rewards in [{:.4}, {:.4}], smallest self-transition {:.4}",
        mdp.min_reward(),
        mdp.max_reward(),
        mdp.min_self_transition()
    );

    let mut broken = mdp.clone();
    broken.transition[1][2][0] += 0.05;
    match broken.validate() {
        Err(e) => println!("perturbed row rejected: {e}"),
        Ok(()) => unreachable!("row no longer sums to one"),
    }
    Ok(())
}
