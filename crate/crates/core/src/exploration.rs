//! Action selection: ε-greedy and UCB.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::NextValue;
use crate::mdp::TabularMdp;
use crate::qtable::{argmax, QTable};

/// Default bonus scale `c`. Q-tables start at zero, so the bonus has to be
/// large relative to the value range for unvisited actions to get tried.
pub const DEFAULT_UCB_SCALE: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorationError {
    #[error("epsilon {0} must lie in [0, 1]")]
    InvalidEpsilon(f64),
    #[error("UCB scale {0} must be nonnegative")]
    InvalidScale(f64),
    #[error("value ceiling must be finite")]
    InvalidCeiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationKind {
    EpsGreedy,
    Ucb,
}

impl ExplorationKind {
    pub fn name(self) -> &'static str {
        match self {
            ExplorationKind::EpsGreedy => "eps-greedy",
            ExplorationKind::Ucb => "ucb",
        }
    }
}

impl std::str::FromStr for ExplorationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eps-greedy" | "epsilon-greedy" | "eps" => Ok(ExplorationKind::EpsGreedy),
            "ucb" => Ok(ExplorationKind::Ucb),
            other => Err(format!("unknown exploration policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EePolicyConfig {
    pub kind: ExplorationKind,
    pub epsilon: f64,
    /// UCB bonus scale `c`.
    pub c: f64,
    /// Ceiling for backup targets in UCB mode. `None` derives it from the
    /// model and current subsidy with [`default_v_max`].
    pub v_max: Option<f64>,
}

impl EePolicyConfig {
    pub fn eps_greedy(epsilon: f64) -> Self {
        Self {
            kind: ExplorationKind::EpsGreedy,
            epsilon,
            c: DEFAULT_UCB_SCALE,
            v_max: None,
        }
    }

    pub fn ucb(c: f64) -> Self {
        Self {
            kind: ExplorationKind::Ucb,
            epsilon: 0.0,
            c,
            v_max: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExplorationError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ExplorationError::InvalidEpsilon(self.epsilon));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(ExplorationError::InvalidScale(self.c));
        }
        if matches!(self.v_max, Some(v) if !v.is_finite()) {
            return Err(ExplorationError::InvalidCeiling);
        }
        Ok(())
    }

    /// Picks an action in `state`. UCB never touches `rng`.
    #[inline]
    pub fn select<R: Rng + ?Sized>(
        &self,
        q: &QTable,
        state: usize,
        counts: &[u64],
        n: u64,
        rng: &mut R,
    ) -> usize {
        match self.kind {
            ExplorationKind::EpsGreedy => select_eps_greedy(q, state, self.epsilon, rng),
            ExplorationKind::Ucb => select_ucb(q, state, counts, n, self.c),
        }
    }

    /// Next-state valuation for backups: clipped in UCB mode, raw otherwise.
    pub fn next_value(&self, env: &TabularMdp, subsidy: f64) -> NextValue {
        match self.kind {
            ExplorationKind::EpsGreedy => NextValue::Max,
            ExplorationKind::Ucb => {
                NextValue::Clipped(self.v_max.unwrap_or_else(|| default_v_max(env, subsidy)))
            }
        }
    }
}

/// With probability ε a uniformly random action, otherwise the greedy one.
/// Always consumes one uniform draw, plus one more when exploring.
#[inline]
pub fn select_eps_greedy<R: Rng + ?Sized>(q: &QTable, state: usize, epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..q.num_actions())
    } else {
        q.greedy_action(state)
    }
}

/// `argmax_a Q(s, a) + c sqrt(ln(n + 1) / (N(s, a) + 1))`, lowest index on ties.
#[inline]
pub fn select_ucb(q: &QTable, state: usize, counts: &[u64], n: u64, c: f64) -> usize {
    let log_n = ((n as f64) + 1.0).ln();
    let row = q.row(state);
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, (&value, &count)) in row.iter().zip(counts).enumerate() {
        let score = value + c * (log_n / (count as f64 + 1.0)).sqrt();
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

/// Greedy action, lowest index on ties.
pub fn greedy(q: &QTable, state: usize) -> usize {
    argmax(q.row(state))
}

/// `min(v_max, max_a Q(s, a))`.
pub fn clip_value(q: &QTable, state: usize, v_max: f64) -> f64 {
    q.max_value(state).min(v_max)
}

/// `(r_max + max(0, λ)) / (1 - β)`: no discounted return can exceed it.
pub fn default_v_max(env: &TabularMdp, subsidy: f64) -> f64 {
    (env.max_reward() + subsidy.max(0.0)) / (1.0 - env.discount)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn q2() -> QTable {
        QTable::from_rows(&[vec![0.2, 0.9], vec![1.0, 1.0]])
    }

    #[test]
    fn zero_epsilon_is_greedy() {
        let mut rng = RngStream::new(11);
        for _ in 0..1000 {
            assert_eq!(select_eps_greedy(&q2(), 0, 0.0, &mut rng), 1);
            assert_eq!(select_eps_greedy(&q2(), 1, 0.0, &mut rng), 0);
        }
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let mut rng = RngStream::new(12);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| select_eps_greedy(&q2(), 0, 1.0, &mut rng) == 1)
            .count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn greedy_share_under_paper_epsilon() {
        let mut rng = RngStream::new(13);
        let n = 100_000;
        let greedy_hits = (0..n)
            .filter(|_| select_eps_greedy(&q2(), 0, 0.3, &mut rng) == 1)
            .count() as f64;
        assert!((greedy_hits / n as f64 - 0.85).abs() < 0.01);
    }

    #[test]
    fn ucb_degenerates_to_greedy() {
        let q = q2();
        assert_eq!(select_ucb(&q, 0, &[0, 50], 99, 0.0), 1);
        assert_eq!(select_ucb(&q, 0, &[0, 50], 0, 5.0), 1);
    }

    #[test]
    fn ucb_prefers_less_visited_action_on_equal_values() {
        let q = QTable::from_rows(&[vec![1.0, 1.0]]);
        let bonus0 = 2.0 * (100f64.ln() / 101.0).sqrt();
        let bonus1 = 2.0 * (100f64.ln() / 1.0).sqrt();
        assert!(bonus1 > bonus0);
        assert_eq!(select_ucb(&q, 0, &[100, 0], 99, 2.0), 1);
    }

    #[test]
    fn clip_value_caps_the_maximum() {
        let q = QTable::from_rows(&[vec![3.0, 1.0], vec![12.0, -4.0]]);
        assert_eq!(clip_value(&q, 0, 10.0), 3.0);
        assert_eq!(clip_value(&q, 1, 10.0), 10.0);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(EePolicyConfig::eps_greedy(0.3).validate().is_ok());
        assert!(EePolicyConfig::eps_greedy(1.3).validate().is_err());
        assert!(EePolicyConfig::ucb(-1.0).validate().is_err());
        let mut c = EePolicyConfig::ucb(2.0);
        c.v_max = Some(f64::INFINITY);
        assert!(c.validate().is_err());
    }

    #[test]
    fn next_value_mode_follows_policy_kind() {
        let env = crate::mdp::five_state_example();
        assert_eq!(EePolicyConfig::eps_greedy(0.3).next_value(&env, 0.5), NextValue::Max);
        match EePolicyConfig::ucb(2.0).next_value(&env, 0.5) {
            NextValue::Clipped(v) => assert!((v - (0.9631 + 0.5) / 0.1).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
