//! Versioned JSON experiment configs and the bundled presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::exploration::{EePolicyConfig, ExplorationKind, DEFAULT_UCB_SCALE};
use crate::index_learning::IndexLearnConfig;
use crate::learners::{default_relaxation, LearnerConfig, Variant};
use crate::mdp::{five_state_example, TabularMdp};

pub const SCHEMA: &str = "rmab-experiment/1";

pub const PRESET_NAMES: [&str; 3] = ["paper-single-mdp", "paper-index-learning", "desk-ci"];

const PAPER_SINGLE_MDP: &str = include_str!("../../presets/paper-single-mdp.json");
const PAPER_INDEX_LEARNING: &str = include_str!("../../presets/paper-index-learning.json");
const DESK_CI: &str = include_str!("../../presets/desk-ci.json");

/// A learner variant paired with an exploration policy, written
/// `<variant>-<exploration>`, e.g. `phaseql-ucb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AlgorithmSpec {
    pub variant: Variant,
    pub exploration: ExplorationKind,
}

impl AlgorithmSpec {
    pub const fn new(variant: Variant, exploration: ExplorationKind) -> Self {
        Self { variant, exploration }
    }

    /// All eight variant × exploration combinations.
    pub fn all() -> Vec<AlgorithmSpec> {
        Variant::ALL
            .iter()
            .flat_map(|&v| {
                [ExplorationKind::EpsGreedy, ExplorationKind::Ucb]
                    .into_iter()
                    .map(move |e| AlgorithmSpec::new(v, e))
            })
            .collect()
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.variant.name(), self.exploration.name())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (variant, exploration) = s
            .split_once('-')
            .ok_or_else(|| format!("algorithm `{s}` is not of the form <variant>-<exploration>"))?;
        Ok(Self::new(variant.parse()?, exploration.parse()?))
    }
}

impl TryFrom<String> for AlgorithmSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AlgorithmSpec> for String {
    fn from(a: AlgorithmSpec) -> String {
        a.to_string()
    }
}

/// Hyperparameters shared by both experiment kinds. `t_max` is the step
/// budget of a single-MDP run and the inner-loop length of index learning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub alpha: f64,
    /// Overrides the fixture's discount when set.
    #[serde(default)]
    pub discount: Option<f64>,
    pub gamma: f64,
    pub epsilon: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// GSQL relaxation; `None` uses the largest contraction-preserving value.
    #[serde(default)]
    pub w: Option<f64>,
    pub m: usize,
    pub t_max: u64,
    pub k_max: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// UCB clipping ceiling; `None` derives it from the model and subsidy.
    #[serde(default)]
    pub v_max: Option<f64>,
}

fn default_c() -> f64 {
    DEFAULT_UCB_SCALE
}

fn default_delta() -> f64 {
    1e-3
}

/// Monte-Carlo settings for policy comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub arms: usize,
    pub plays_per_slot: usize,
    pub replications: usize,
    /// Truncation tolerance for the discounted sum.
    pub tolerance: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            arms: 5,
            plays_per_slot: 1,
            replications: 1000,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    /// Experiment id; also the stem of every output file.
    pub experiment: String,
    /// Arm fixture; `None` is the bundled five-state arm.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub hyper: Hyperparameters,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Record every `cadence`-th iteration or phase.
    pub cadence: u64,
    #[serde(default)]
    pub simulation: SimulationSettings,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, ExperimentError> {
        let text = match name {
            "paper-single-mdp" => PAPER_SINGLE_MDP,
            "paper-index-learning" => PAPER_INDEX_LEARNING,
            "desk-ci" => DESK_CI,
            other => {
                return Err(ExperimentError::Config(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative fixture and output paths resolve
    /// against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let Some(fixture) = cfg.fixture.as_mut().filter(|f| f.is_relative()) {
            *fixture = base.join(&*fixture);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.schema != SCHEMA {
            return bad(format!("schema `{}` is not `{SCHEMA}`", self.schema));
        }
        if self.experiment.is_empty()
            || !self
                .experiment
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return bad(format!(
                "experiment id `{}` must be non-empty ASCII letters, digits, `-`, `_` or `.`",
                self.experiment
            ));
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return bad(format!("algorithm `{a}` is listed twice"));
            }
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return bad(format!("seed {s} is listed twice"));
            }
        }
        if self.cadence == 0 {
            return bad("cadence must be at least 1".into());
        }
        let h = &self.hyper;
        if h.t_max == 0 || h.k_max == 0 {
            return bad("t_max and k_max must be at least 1".into());
        }
        if !(h.delta > 0.0 && h.delta.is_finite()) {
            return bad(format!("delta {} must be positive", h.delta));
        }
        if !(0.0..=1.0).contains(&h.gamma) {
            return bad(format!("gamma {} must lie in [0, 1]", h.gamma));
        }
        if matches!(h.discount, Some(b) if !(0.0..1.0).contains(&b)) {
            return bad(format!("discount {:?} must lie in [0, 1)", h.discount));
        }
        let sim = &self.simulation;
        if sim.replications == 0 {
            return bad("simulation replications must be at least 1".into());
        }
        if sim.plays_per_slot == 0 || sim.plays_per_slot >= sim.arms {
            return bad(format!(
                "simulation needs 1 <= plays_per_slot < arms, got {} of {}",
                sim.plays_per_slot, sim.arms
            ));
        }
        if !(sim.tolerance > 0.0 && sim.tolerance.is_finite()) {
            return bad(format!("simulation tolerance {} must be positive", sim.tolerance));
        }
        for a in &self.algorithms {
            self.learner_with(*a, h.discount.unwrap_or(0.0), 1.0)
                .validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
            self.policy(a.exploration)
                .validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The arm model with the discount override applied.
    pub fn environment(&self) -> Result<TabularMdp, ExperimentError> {
        let mut env = match &self.fixture {
            Some(path) => TabularMdp::load(path)?,
            None => five_state_example(),
        };
        if let Some(beta) = self.hyper.discount {
            env.discount = beta;
            env.validate()?;
        }
        Ok(env)
    }

    fn learner_with(&self, algorithm: AlgorithmSpec, discount: f64, default_w: f64) -> LearnerConfig {
        let h = &self.hyper;
        LearnerConfig::new(algorithm.variant, h.alpha, discount)
            .with_relaxation(h.w.unwrap_or(default_w))
            .with_samples(h.m)
    }

    /// Learner settings bound to a model: discount and default `w` come from `env`.
    pub fn learner_for(&self, algorithm: AlgorithmSpec, env: &TabularMdp) -> LearnerConfig {
        self.learner_with(algorithm, env.discount, default_relaxation(env))
    }

    pub fn policy(&self, kind: ExplorationKind) -> EePolicyConfig {
        let mut policy = match kind {
            ExplorationKind::EpsGreedy => EePolicyConfig::eps_greedy(self.hyper.epsilon),
            ExplorationKind::Ucb => EePolicyConfig::ucb(self.hyper.c),
        };
        policy.v_max = self.hyper.v_max;
        policy
    }

    pub fn index_config(&self, algorithm: AlgorithmSpec, env: &TabularMdp) -> IndexLearnConfig {
        IndexLearnConfig {
            gamma: self.hyper.gamma,
            delta: self.hyper.delta,
            t_max: self.hyper.t_max,
            k_max: self.hyper.k_max,
            learner: self.learner_for(algorithm, env),
            policy: self.policy(algorithm.exploration),
        }
    }

    /// Replaces the seed list with a single seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = dir.into();
        self
    }
}
