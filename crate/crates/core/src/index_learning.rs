//! Two-timescale Whittle index learning.
//!
//! One Q-table is kept per threshold state `s̃`. Each phase runs `t_max`
//! fast Q-updates per threshold state at a frozen subsidy `λ(s̃)`, then
//! moves every subsidy on the slow timescale:
//!
//! ```text
//! λ(s̃) ← λ(s̃) + γ (Q(s̃, 1, s̃) − Q(s̃, 0, s̃))
//! ```
//!
//! The run stops after `k_max` phases, or earlier once the largest action
//! gap at the threshold states falls below `δ`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::Episode;
use crate::exploration::{EePolicyConfig, ExplorationError};
use crate::learners::{LearnerConfig, LearnerError, LearnerState, StepSize};
use crate::mdp::TabularMdp;
use crate::oracle::default_bracket;
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexLearnError {
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
    #[error("index learning runs on two-action arms, model has {0} actions")]
    NotTwoAction(usize),
    #[error("inner step size must be constant, got {0:?}")]
    DecayingStepSize(StepSize),
    #[error("outer step size γ = {0} must lie in [0, 1]")]
    InvalidGamma(f64),
    #[error("convergence threshold δ = {0} must be positive")]
    InvalidDelta(f64),
    #[error("t_max and k_max must be at least 1")]
    EmptyBudget,
    #[error("learned discount {learner} differs from the model's {model}")]
    DiscountMismatch { learner: f64, model: f64 },
    #[error("subsidy for state {state} left the admissible range (λ = {lambda}, bound {bound}) at phase {phase}")]
    Diverged {
        state: usize,
        lambda: f64,
        bound: f64,
        phase: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexLearnConfig {
    /// Slow step size for the subsidy.
    pub gamma: f64,
    /// Early-stop threshold on `max_s̃ |gap(s̃)|`.
    pub delta: f64,
    /// Fast updates per threshold state per phase.
    pub t_max: u64,
    /// Maximum number of phases.
    pub k_max: usize,
    /// Inner learner; its step size is the fast step `α`.
    pub learner: LearnerConfig,
    pub policy: EePolicyConfig,
}

impl IndexLearnConfig {
    pub fn alpha(&self) -> f64 {
        self.learner.alpha.at(0)
    }

    pub fn validate(&self) -> Result<(), IndexLearnError> {
        self.learner.validate()?;
        self.policy.validate()?;
        if let StepSize::Harmonic = self.learner.alpha {
            return Err(IndexLearnError::DecayingStepSize(self.learner.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(IndexLearnError::InvalidGamma(self.gamma));
        }
        if !(self.delta > 0.0) {
            return Err(IndexLearnError::InvalidDelta(self.delta));
        }
        if self.t_max == 0 || self.k_max == 0 {
            return Err(IndexLearnError::EmptyBudget);
        }
        Ok(())
    }
}

/// Subsidies and per-threshold learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexLearnState {
    pub lambda: Vec<f64>,
    /// `learners[s̃]` holds `Q(·, ·, s̃)`.
    pub learners: Vec<LearnerState>,
    pub outer_step: usize,
}

impl IndexLearnState {
    /// Zero subsidies and zero tables.
    pub fn new(env: &TabularMdp, cfg: &IndexLearnConfig) -> Self {
        let k = env.num_states;
        Self {
            lambda: vec![0.0; k],
            learners: (0..k)
                .map(|_| LearnerState::new(&cfg.learner, k, env.num_actions))
                .collect(),
            outer_step: 0,
        }
    }

    /// `Q(s̃, 1, s̃) − Q(s̃, 0, s̃)`.
    pub fn action_gap(&self, threshold: usize) -> f64 {
        let q = &self.learners[threshold].q;
        q.get(threshold, 1) - q.get(threshold, 0)
    }

    pub fn action_gaps(&self) -> Vec<f64> {
        (0..self.lambda.len()).map(|s| self.action_gap(s)).collect()
    }

    /// `t_max` fast updates of `Q(·, ·, s̃)` at the frozen subsidy `λ(s̃)`.
    /// The start state is drawn uniformly from `rng`; visit counts and the
    /// UCB step counter restart with each call.
    pub fn inner_loop<R: Rng + ?Sized>(
        &mut self,
        threshold: usize,
        env: &TabularMdp,
        rng: &mut R,
        cfg: &IndexLearnConfig,
    ) {
        inner_loop(
            &mut self.learners[threshold],
            self.lambda[threshold],
            env,
            rng,
            cfg,
        );
    }

    /// Moves `λ(s̃)` by `γ · gap(s̃)` and returns the increment.
    pub fn outer_update(&mut self, threshold: usize, gamma: f64) -> f64 {
        let increment = gamma * self.action_gap(threshold);
        self.lambda[threshold] += increment;
        increment
    }
}

fn inner_loop<R: Rng + ?Sized>(
    learner: &mut LearnerState,
    subsidy: f64,
    env: &TabularMdp,
    rng: &mut R,
    cfg: &IndexLearnConfig,
) {
    learner.reset_counts();
    let start = rng.random_range(0..env.num_states);
    Episode::new(env, &cfg.learner, &cfg.policy)
        .with_subsidy(subsidy)
        .run(learner, start, cfg.t_max, rng, |_| {});
}

/// Per-phase summary, taken after the inner loops and before the subsidy moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    /// Subsidies used during this phase's inner loops.
    pub lambda: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `E_k = mean_s̃ |gap(s̃)|`.
    pub mean_abs_gap: f64,
}

impl PhaseRecord {
    pub fn max_abs_gap(&self) -> f64 {
        self.gaps.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexLearnOutcome {
    /// Learned indices `λ(s̃)` after the last outer update.
    pub lambda: Vec<f64>,
    /// True if the δ test fired before the budget ran out.
    pub converged: bool,
    pub phases: usize,
    pub trace: Vec<PhaseRecord>,
    pub state: IndexLearnState,
}

/// Runs the full two-timescale loop.
///
/// Threshold state `s̃` draws from `rng.child(s̃)` for the whole run, so the
/// inner loops are independent and are executed in parallel; the result is
/// identical to running them one after another.
pub fn run(env: &TabularMdp, cfg: &IndexLearnConfig, rng: &RngStream) -> Result<IndexLearnOutcome, IndexLearnError> {
    run_with(env, cfg, rng, |_| {})
}

/// [`run`] with a callback per completed phase.
pub fn run_with<F>(
    env: &TabularMdp,
    cfg: &IndexLearnConfig,
    rng: &RngStream,
    mut on_phase: F,
) -> Result<IndexLearnOutcome, IndexLearnError>
where
    F: FnMut(&PhaseRecord),
{
    cfg.validate()?;
    if env.num_actions != 2 {
        return Err(IndexLearnError::NotTwoAction(env.num_actions));
    }
    if cfg.learner.discount != env.discount {
        return Err(IndexLearnError::DiscountMismatch {
            learner: cfg.learner.discount,
            model: env.discount,
        });
    }
    let bound = default_bracket(env).1;
    let mut state = IndexLearnState::new(env, cfg);
    let mut streams: Vec<RngStream> = (0..env.num_states as u64).map(|s| rng.child(s)).collect();
    let mut trace = Vec::with_capacity(cfg.k_max);
    let mut converged = false;

    for phase in 0..cfg.k_max {
        let lambda = state.lambda.clone();
        state
            .learners
            .par_iter_mut()
            .zip(streams.par_iter_mut())
            .zip(lambda.par_iter())
            .for_each(|((learner, stream), &subsidy)| inner_loop(learner, subsidy, env, stream, cfg));

        let gaps = state.action_gaps();
        let record = PhaseRecord {
            phase,
            mean_abs_gap: gaps.iter().map(|g| g.abs()).sum::<f64>() / gaps.len() as f64,
            lambda,
            gaps,
        };
        for s in 0..env.num_states {
            state.outer_update(s, cfg.gamma);
            if !(state.lambda[s].abs() <= bound) {
                return Err(IndexLearnError::Diverged {
                    state: s,
                    lambda: state.lambda[s],
                    bound,
                    phase,
                });
            }
        }
        state.outer_step += 1;
        let stop = record.max_abs_gap() < cfg.delta;
        on_phase(&record);
        trace.push(record);
        if stop {
            converged = true;
            break;
        }
    }

    Ok(IndexLearnOutcome {
        lambda: state.lambda.clone(),
        converged,
        phases: trace.len(),
        trace,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::EePolicyConfig;
    use crate::learners::Variant;
    use crate::mdp::five_state_example;

    fn cfg(variant: Variant, t_max: u64, k_max: usize) -> IndexLearnConfig {
        IndexLearnConfig {
            gamma: 0.005,
            delta: 1e-6,
            t_max,
            k_max,
            learner: LearnerConfig::new(variant, 0.02, 0.9).with_samples(20),
            policy: EePolicyConfig::eps_greedy(0.3),
        }
    }

    #[test]
    fn single_step_inner_loop_adds_subsidy() {
        let mut env = five_state_example();
        env.discount = 0.0;
        let mut c = cfg(Variant::Ql, 1, 1);
        c.learner = LearnerConfig::new(Variant::Ql, 1.0, 0.0);
        c.policy = EePolicyConfig::eps_greedy(0.0);
        let mut st = IndexLearnState::new(&env, &c);
        st.lambda[2] = 0.5;
        let mut rng = RngStream::new(4);
        st.inner_loop(2, &env, &mut rng, &c);
        // Zero table: greedy tie picks the passive action.
        let q = &st.learners[2].q;
        let visited: Vec<usize> = (0..5).filter(|&s| q.get(s, 0) != 0.0).collect();
        assert_eq!(visited.len(), 1);
        let s = visited[0];
        assert_eq!(q.get(s, 0), env.reward(s, 0) + 0.5);
        assert_eq!(st.learners[2].step, 1);
    }

    #[test]
    fn outer_update_moves_by_gamma_times_gap() {
        let env = five_state_example();
        let c = cfg(Variant::Ql, 1, 1);
        let mut st = IndexLearnState::new(&env, &c);
        st.learners[1].q.set(1, 1, 3.0);
        st.learners[1].q.set(1, 0, 2.0);
        let inc = st.outer_update(1, 0.005);
        assert!((inc - 0.005).abs() < 1e-15);
        assert!((st.lambda[1] - 0.005).abs() < 1e-15);
        st.learners[3].q.set(3, 1, 2.0);
        st.learners[3].q.set(3, 0, 2.0);
        assert_eq!(st.outer_update(3, 0.005), 0.0);
        assert_eq!(st.lambda[3], 0.0);
        assert_eq!(st.lambda[0], 0.0);
    }

    #[test]
    fn zero_gamma_freezes_subsidies() {
        let env = five_state_example();
        let mut c = cfg(Variant::Ql, 200, 5);
        c.gamma = 0.0;
        let out = run(&env, &c, &RngStream::new(1)).unwrap();
        assert!(out.lambda.iter().all(|&l| l == 0.0));
        assert_eq!(out.phases, 5);
    }

    #[test]
    fn one_phase_budget_moves_each_subsidy_once() {
        let env = five_state_example();
        let c = cfg(Variant::Ql, 300, 1);
        let out = run(&env, &c, &RngStream::new(2)).unwrap();
        assert_eq!(out.phases, 1);
        assert_eq!(out.state.outer_step, 1);
        for s in 0..5 {
            let expected = c.gamma * out.trace[0].gaps[s];
            assert!((out.lambda[s] - expected).abs() < 1e-15);
            // Timescale separation: exactly t_max fast steps per slow step.
            assert_eq!(out.state.learners[s].step, 300);
        }
    }

    #[test]
    fn huge_delta_stops_after_first_phase() {
        let env = five_state_example();
        let mut c = cfg(Variant::Ql, 100, 50);
        c.delta = 10.0;
        let out = run(&env, &c, &RngStream::new(3)).unwrap();
        assert!(out.converged);
        assert_eq!(out.phases, 1);
    }

    #[test]
    fn same_seed_same_tables() {
        let env = five_state_example();
        let c = cfg(Variant::Gsql, 200, 4);
        let a = run(&env, &c, &RngStream::new(9)).unwrap();
        let b = run(&env, &c, &RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_run_matches_sequential_composition() {
        let env = five_state_example();
        let c = cfg(Variant::PhaseQl, 150, 3);
        let root = RngStream::new(21);
        let par = run(&env, &c, &root).unwrap();

        let mut st = IndexLearnState::new(&env, &c);
        let mut streams: Vec<RngStream> = (0..5).map(|s| root.child(s)).collect();
        for _ in 0..3 {
            for s in 0..5 {
                st.inner_loop(s, &env, &mut streams[s], &c);
            }
            for s in 0..5 {
                st.outer_update(s, c.gamma);
            }
        }
        assert_eq!(par.lambda, st.lambda);
        for s in 0..5 {
            assert_eq!(par.state.learners[s].q, st.learners[s].q);
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let env = five_state_example();
        let mut c = cfg(Variant::Ql, 10, 1);
        c.delta = 0.0;
        assert!(run(&env, &c, &RngStream::new(0)).is_err());
        let mut c = cfg(Variant::Ql, 0, 1);
        assert!(matches!(c.validate(), Err(IndexLearnError::EmptyBudget)));
        c.t_max = 1;
        c.learner.alpha = StepSize::Harmonic;
        assert!(c.validate().is_err());
        let mut c = cfg(Variant::Ql, 10, 1);
        c.learner.discount = 0.5;
        assert!(matches!(
            run(&env, &c, &RngStream::new(0)),
            Err(IndexLearnError::DiscountMismatch { .. })
        ));
    }

    #[test]
    fn runaway_step_size_is_reported() {
        let env = five_state_example();
        let mut c = cfg(Variant::Ql, 50, 200);
        c.gamma = 1.0;
        c.learner = LearnerConfig::new(Variant::Ql, 1.0, 0.9);
        // Large γ with a noisy, fully-replaced table can overshoot; either the
        // run stays within bounds or the divergence is reported, never silent.
        match run(&env, &c, &RngStream::new(5)) {
            Ok(out) => {
                let bound = default_bracket(&env).1;
                assert!(out.lambda.iter().all(|l| l.abs() <= bound));
            }
            Err(e) => assert!(matches!(e, IndexLearnError::Diverged { .. })),
        }
    }
}
