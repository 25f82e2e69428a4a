//! Tabular arm model: a finite discounted MDP with dense kernels.
//!
//! Transition kernels are indexed `[action][state][next_state]` and rewards
//! `[state][action]`, which is also the JSON fixture layout. Action 0 is the
//! passive action of a restless-bandit arm and action 1 the active one.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the row sums of every transition kernel.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("model must have at least one state")]
    NoStates,
    #[error("model must have at least one action")]
    NoActions,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("row (action {action}, state {state}) sums to {sum}, expected 1")]
    NonStochasticRow { action: usize, state: usize, sum: f64 },
    #[error("probability {value} at (action {action}, state {state}, next {next}) is outside [0, 1]")]
    ProbabilityOutOfRange {
        action: usize,
        state: usize,
        next: usize,
        value: f64,
    },
    #[error("reward at (state {state}, action {action}) is not finite")]
    NonFiniteReward { state: usize, action: usize },
    #[error("discount {0} must lie in [0, 1)")]
    InvalidDiscount(f64),
    #[error("state {state} out of range for {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("action {action} out of range for {num_actions} actions")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("failed to read model: {0}")]
    Io(String),
    #[error("malformed model JSON: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    /// `transition[a][s][s2]` is the probability of moving from `s` to `s2` under `a`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
}

/// One observed step of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

const FIVE_STATE_JSON: &str = include_str!("../fixtures/five_state.json");

/// The bundled five-state, two-action example arm (discount 0.9).
pub fn five_state_example() -> TabularMdp {
    TabularMdp::from_json(FIVE_STATE_JSON).expect("bundled fixture is valid")
}

impl TabularMdp {
    /// Builds and validates a model.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        discount: f64,
    ) -> Result<Self, MdpError> {
        let num_actions = transition.len();
        let num_states = transition.first().map_or(0, Vec::len);
        let mdp = Self {
            num_states,
            num_actions,
            discount,
            transition,
            reward,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        let mdp: Self = serde_json::from_str(text).map_err(|e| MdpError::Parse(e.to_string()))?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MdpError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MdpError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Checks every structural invariant, reporting the first offending entry.
    pub fn validate(&self) -> Result<(), MdpError> {
        if self.num_states == 0 {
            return Err(MdpError::NoStates);
        }
        if self.num_actions == 0 {
            return Err(MdpError::NoActions);
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(MdpError::InvalidDiscount(self.discount));
        }
        if self.transition.len() != self.num_actions {
            return Err(MdpError::Shape(format!(
                "transition has {} kernels, expected {}",
                self.transition.len(),
                self.num_actions
            )));
        }
        for (a, kernel) in self.transition.iter().enumerate() {
            if kernel.len() != self.num_states {
                return Err(MdpError::Shape(format!(
                    "kernel {a} has {} rows, expected {}",
                    kernel.len(),
                    self.num_states
                )));
            }
            for (s, row) in kernel.iter().enumerate() {
                if row.len() != self.num_states {
                    return Err(MdpError::Shape(format!(
                        "kernel {a} row {s} has {} entries, expected {}",
                        row.len(),
                        self.num_states
                    )));
                }
                for (next, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(MdpError::ProbabilityOutOfRange {
                            action: a,
                            state: s,
                            next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(MdpError::NonStochasticRow {
                        action: a,
                        state: s,
                        sum,
                    });
                }
            }
        }
        if self.reward.len() != self.num_states {
            return Err(MdpError::Shape(format!(
                "reward has {} rows, expected {}",
                self.reward.len(),
                self.num_states
            )));
        }
        for (s, row) in self.reward.iter().enumerate() {
            if row.len() != self.num_actions {
                return Err(MdpError::Shape(format!(
                    "reward row {s} has {} entries, expected {}",
                    row.len(),
                    self.num_actions
                )));
            }
            if let Some(a) = row.iter().position(|r| !r.is_finite()) {
                return Err(MdpError::NonFiniteReward { state: s, action: a });
            }
        }
        Ok(())
    }

    pub fn check_state(&self, state: usize) -> Result<(), MdpError> {
        if state < self.num_states {
            Ok(())
        } else {
            Err(MdpError::StateOutOfRange {
                state,
                num_states: self.num_states,
            })
        }
    }

    pub fn check_action(&self, action: usize) -> Result<(), MdpError> {
        if action < self.num_actions {
            Ok(())
        } else {
            Err(MdpError::ActionOutOfRange {
                action,
                num_actions: self.num_actions,
            })
        }
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state][action]
    }

    #[inline]
    pub fn row(&self, action: usize, state: usize) -> &[f64] {
        &self.transition[action][state]
    }

    pub fn max_reward(&self) -> f64 {
        self.reward
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_reward(&self) -> f64 {
        self.reward
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward
            .iter()
            .flatten()
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// Smallest self-transition probability `p[a][s][s]` over all pairs.
    pub fn min_self_transition(&self) -> f64 {
        self.transition
            .iter()
            .flat_map(|kernel| kernel.iter().enumerate().map(|(s, row)| row[s]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Reward with the passivity subsidy: `r(s, a) + λ` when `a == 0`, else `r(s, a)`.
    pub fn subsidized_reward(&self, state: usize, action: usize, subsidy: f64) -> Result<f64, MdpError> {
        self.check_state(state)?;
        self.check_action(action)?;
        Ok(self.reward(state, action) + passive_subsidy(action, subsidy))
    }

    /// Generative access: one draw from `(state, action)`.
    pub fn sample_next<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> Result<Transition, MdpError> {
        self.check_state(state)?;
        self.check_action(action)?;
        Ok(Transition {
            state,
            action,
            reward: self.reward(state, action),
            next_state: self.draw_next_state(state, action, rng),
        })
    }

    /// Inverse-CDF draw of a next state. Indices are not range-checked.
    #[inline]
    pub fn draw_next_state<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> usize {
        let row = self.row(action, state);
        let u: f64 = rng.random();
        // First index whose running sum exceeds u, counted without branching.
        let mut acc = 0.0;
        let mut below = 0;
        for &p in row {
            acc += p;
            below += (acc <= u) as usize;
        }
        if below < row.len() {
            below
        } else {
            // Row sums may fall short of 1 by rounding.
            row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
    }
}

/// The subsidy earned by `action`: `λ` for the passive action 0, nothing otherwise.
#[inline]
pub fn passive_subsidy(action: usize, subsidy: f64) -> f64 {
    if action == 0 {
        subsidy
    } else {
        0.0
    }
}
