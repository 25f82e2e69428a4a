//! Tabular Q-learning variants and two-timescale Whittle index learning for
//! restless multi-armed bandits.
//!
//! - [`mdp`]: the arm model, validation and seeded sampling.
//! - [`oracle`]: value iteration, policy evaluation and exact Whittle indices.
//! - [`learners`]: QL, speedy QL, generalized speedy QL and phase QL updates.
//! - [`exploration`]: ε-greedy and UCB action selection.
//! - [`index_learning`]: the two-timescale index learner.
//! - [`rmab_sim`]: N-arm simulation of index policies.
//! - [`experiment`]: config-driven runs that write CSV traces.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod episode;
pub mod experiment;
pub mod exploration;
pub mod index_learning;
pub mod learners;
pub mod mdp;
pub mod oracle;
pub mod qtable;
pub mod rmab_sim;
pub mod rng;

pub use episode::Episode;
pub use exploration::{EePolicyConfig, ExplorationKind};
pub use index_learning::{IndexLearnConfig, IndexLearnOutcome, IndexLearnState};
pub use learners::{LearnerConfig, LearnerState, NextValue, StepSize, Variant};
pub use mdp::{five_state_example, TabularMdp, Transition};
pub use oracle::{policy_value, solve_q, whittle_index, whittle_indices, WhittleIndexVector};
pub use qtable::QTable;
pub use rmab_sim::{Evaluation, PolicySpec, RmabInstance};
pub use rng::RngStream;
