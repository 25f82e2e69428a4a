//! N-arm restless bandit simulator.
//!
//! Every slot exactly `M` of the `N` arms are played (action 1); all arms
//! move according to their own kernel under their assigned action. The
//! Whittle policy plays the `M` arms whose current-state indices are
//! largest, breaking ties by lower arm id.

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{MdpError, TabularMdp};
use crate::rng::RngStream;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] MdpError),
    #[error("instance needs at least two arms")]
    TooFewArms,
    #[error("plays per slot must satisfy 1 <= M < N, got M = {m} with N = {n}")]
    InvalidPlays { m: usize, n: usize },
    #[error("arm {arm} has discount {arm_discount}, instance uses {discount}")]
    DiscountMismatch {
        arm: usize,
        arm_discount: f64,
        discount: f64,
    },
    #[error("arm {arm} must have two actions")]
    NotTwoAction { arm: usize },
    #[error("index table does not cover arm {arm}")]
    IndexShape { arm: usize },
    #[error("fixed set must name exactly M distinct arms below N")]
    InvalidFixedSet,
    #[error("joint state has {got} entries for {expected} arms")]
    JointStateShape { got: usize, expected: usize },
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("failed to read instance: {0}")]
    Io(String),
    #[error("malformed instance JSON: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmabInstance {
    arms: Vec<TabularMdp>,
    plays_per_slot: usize,
    discount: f64,
}

impl RmabInstance {
    pub fn new(arms: Vec<TabularMdp>, plays_per_slot: usize) -> Result<Self, SimError> {
        let discount = arms.first().map_or(0.0, |a| a.discount);
        Self::with_discount(arms, plays_per_slot, discount)
    }

    pub fn with_discount(arms: Vec<TabularMdp>, plays_per_slot: usize, discount: f64) -> Result<Self, SimError> {
        if arms.len() < 2 {
            return Err(SimError::TooFewArms);
        }
        if plays_per_slot == 0 || plays_per_slot >= arms.len() {
            return Err(SimError::InvalidPlays {
                m: plays_per_slot,
                n: arms.len(),
            });
        }
        for (i, arm) in arms.iter().enumerate() {
            arm.validate()?;
            if arm.num_actions != 2 {
                return Err(SimError::NotTwoAction { arm: i });
            }
            if arm.discount != discount {
                return Err(SimError::DiscountMismatch {
                    arm: i,
                    arm_discount: arm.discount,
                    discount,
                });
            }
        }
        Ok(Self {
            arms,
            plays_per_slot,
            discount,
        })
    }

    /// `n` copies of one arm.
    pub fn homogeneous(arm: &TabularMdp, n: usize, plays_per_slot: usize) -> Result<Self, SimError> {
        Self::new(vec![arm.clone(); n], plays_per_slot)
    }

    pub fn arms(&self) -> &[TabularMdp] {
        &self.arms
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn plays_per_slot(&self) -> usize {
        self.plays_per_slot
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.arms.iter().map(TabularMdp::max_abs_reward).fold(0.0, f64::max)
    }

    /// Loads an [`InstanceFile`]; arm paths resolve relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let file: InstanceFile = serde_json::from_str(&text).map_err(|e| SimError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        file.resolve(base)
    }
}

/// On-disk instance: arm fixture references plus `M` and `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub arms: Vec<PathBuf>,
    pub plays_per_slot: usize,
    pub discount: f64,
}

impl InstanceFile {
    pub fn resolve(&self, base: &Path) -> Result<RmabInstance, SimError> {
        let arms = self
            .arms
            .iter()
            .map(|p| {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                TabularMdp::load(full)
            })
            .collect::<Result<Vec<_>, _>>()?;
        RmabInstance::with_discount(arms, self.plays_per_slot, self.discount)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySpec {
    /// `index[arm][state]`.
    WhittleIndex(Vec<Vec<f64>>),
    /// `M` arms uniformly at random.
    RandomM,
    /// Always the same arms.
    FixedSet(Vec<usize>),
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::WhittleIndex(_) => "whittle-index",
            PolicySpec::RandomM => "random-m",
            PolicySpec::FixedSet(_) => "fixed-set",
        }
    }

    pub fn check(&self, instance: &RmabInstance) -> Result<(), SimError> {
        match self {
            PolicySpec::WhittleIndex(table) => {
                for (i, arm) in instance.arms.iter().enumerate() {
                    match table.get(i) {
                        Some(row) if row.len() == arm.num_states && row.iter().all(|v| v.is_finite()) => {}
                        _ => return Err(SimError::IndexShape { arm: i }),
                    }
                }
                Ok(())
            }
            PolicySpec::RandomM => Ok(()),
            PolicySpec::FixedSet(set) => {
                let mut sorted = set.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != instance.plays_per_slot
                    || set.len() != sorted.len()
                    || sorted.iter().any(|&a| a >= instance.num_arms())
                {
                    return Err(SimError::InvalidFixedSet);
                }
                Ok(())
            }
        }
    }
}

/// Arms to play this slot, as a 0/1 action per arm.
pub fn select_arms<R: Rng + ?Sized>(
    instance: &RmabInstance,
    joint_state: &[usize],
    policy: &PolicySpec,
    rng: &mut R,
) -> Vec<usize> {
    let n = instance.num_arms();
    let m = instance.plays_per_slot;
    let mut actions = vec![0; n];
    match policy {
        PolicySpec::WhittleIndex(table) => {
            let mut order: Vec<usize> = (0..n).collect();
            // Stable sort keeps lower arm ids first among equal indices.
            order.sort_by(|&i, &j| {
                table[j][joint_state[j]]
                    .partial_cmp(&table[i][joint_state[i]])
                    .expect("finite indices")
            });
            for &arm in &order[..m] {
                actions[arm] = 1;
            }
        }
        PolicySpec::RandomM => {
            for arm in sample(rng, n, m) {
                actions[arm] = 1;
            }
        }
        PolicySpec::FixedSet(set) => {
            for &arm in set {
                actions[arm] = 1;
            }
        }
    }
    assert_eq!(actions.iter().sum::<usize>(), m, "exactly M arms must be played");
    actions
}

/// One slot: choose arms, collect `Σ_i r_i(X^i, a^i)`, move every arm.
pub fn step<R: Rng + ?Sized>(
    instance: &RmabInstance,
    joint_state: &[usize],
    policy: &PolicySpec,
    rng: &mut R,
) -> Result<(Vec<usize>, f64), SimError> {
    if joint_state.len() != instance.num_arms() {
        return Err(SimError::JointStateShape {
            got: joint_state.len(),
            expected: instance.num_arms(),
        });
    }
    for (arm, &s) in instance.arms.iter().zip(joint_state) {
        arm.check_state(s)?;
    }
    policy.check(instance)?;
    Ok(step_unchecked(instance, joint_state, policy, rng))
}

fn step_unchecked<R: Rng + ?Sized>(
    instance: &RmabInstance,
    joint_state: &[usize],
    policy: &PolicySpec,
    rng: &mut R,
) -> (Vec<usize>, f64) {
    let actions = select_arms(instance, joint_state, policy, rng);
    let mut reward = 0.0;
    let next = instance
        .arms
        .iter()
        .zip(joint_state.iter().zip(&actions))
        .map(|(arm, (&s, &a))| {
            reward += arm.reward(s, a);
            arm.draw_next_state(s, a, rng)
        })
        .collect();
    (next, reward)
}

/// Monte-Carlo estimate of the discounted return with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean: f64,
    pub half_width: f64,
    pub replications: usize,
    pub horizon: usize,
}

impl Evaluation {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &Evaluation) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// Smallest horizon with `β^H · r_max / (1 − β) < tol`.
pub fn truncation_horizon(discount: f64, r_max: f64, tol: f64) -> usize {
    if discount <= 0.0 || r_max <= 0.0 {
        return 1;
    }
    let h = (tol * (1.0 - discount) / r_max).ln() / discount.ln();
    (h.ceil() as usize).max(1)
}

/// Mean of `Σ_{t<H} β^t · slot_reward` over independent replications.
///
/// Replication `i` draws from `rng.child(i)`, starting every arm in a
/// uniformly random state; replications run in parallel and the result does
/// not depend on the thread count.
pub fn evaluate(
    instance: &RmabInstance,
    policy: &PolicySpec,
    horizon: usize,
    replications: usize,
    rng: &RngStream,
) -> Result<Evaluation, SimError> {
    if replications == 0 {
        return Err(SimError::NoReplications);
    }
    policy.check(instance)?;
    let returns: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng.child(i);
            replicate(instance, policy, horizon, &mut stream)
        })
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let half_width = if returns.len() > 1 {
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Z_95 * (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(Evaluation {
        mean,
        half_width,
        replications,
        horizon,
    })
}

fn replicate<R: Rng + ?Sized>(instance: &RmabInstance, policy: &PolicySpec, horizon: usize, rng: &mut R) -> f64 {
    let mut joint: Vec<usize> = instance
        .arms
        .iter()
        .map(|arm| rng.random_range(0..arm.num_states))
        .collect();
    let mut weight = 1.0;
    let mut total = 0.0;
    for _ in 0..horizon {
        let (next, reward) = step_unchecked(instance, &joint, policy, rng);
        total += weight * reward;
        weight *= instance.discount;
        joint = next;
    }
    total
}
