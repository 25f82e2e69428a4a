//! The shared act–observe–update loop on a single arm.

use rand::Rng;

use crate::exploration::EePolicyConfig;
use crate::learners::{LearnerConfig, LearnerState, NextValue, Variant};
use crate::mdp::{passive_subsidy, TabularMdp, Transition};

/// Everything a trajectory needs besides the learner's own state.
#[derive(Debug, Clone, Copy)]
pub struct Episode<'a> {
    pub env: &'a TabularMdp,
    pub learner: &'a LearnerConfig,
    pub policy: &'a EePolicyConfig,
    /// Passivity subsidy λ added to the reward of action 0.
    pub subsidy: f64,
}

impl<'a> Episode<'a> {
    pub fn new(env: &'a TabularMdp, learner: &'a LearnerConfig, policy: &'a EePolicyConfig) -> Self {
        Self {
            env,
            learner,
            policy,
            subsidy: 0.0,
        }
    }

    pub fn with_subsidy(mut self, subsidy: f64) -> Self {
        self.subsidy = subsidy;
        self
    }

    /// Runs `steps` updates from `start`, following the trajectory `s ← s'`.
    /// `on_step` sees the learner after every update. Returns the final state.
    ///
    /// Each step: pick `a` with the exploration policy (UCB uses the
    /// learner's step counter and visit counts), observe `(r, s')` with
    /// `r = r(s,a) + (1-a)λ`, then update. Phase QL additionally draws its
    /// `m` generative samples from `(s, a)`.
    pub fn run<R, F>(
        &self,
        state: &mut LearnerState,
        start: usize,
        steps: u64,
        rng: &mut R,
        mut on_step: F,
    ) -> usize
    where
        R: Rng + ?Sized,
        F: FnMut(&LearnerState),
    {
        let next = self.policy.next_value(self.env, self.subsidy);
        let mut s = start;
        for _ in 0..steps {
            s = self.step(state, s, next, rng);
            on_step(state);
        }
        s
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, state: &mut LearnerState, s: usize, next: NextValue, rng: &mut R) -> usize {
        let a = self.policy.select(&state.q, s, state.counts(s), state.step, rng);
        let reward = self.env.reward(s, a) + passive_subsidy(a, self.subsidy);
        let s_next = self.env.draw_next_state(s, a, rng);
        match self.learner.variant {
            Variant::PhaseQl => {
                state.phase_step(s, a, reward, self.env, rng, self.learner, next);
            }
            _ => {
                let t = Transition {
                    state: s,
                    action: a,
                    reward,
                    next_state: s_next,
                };
                state.observe(&t, self.learner, next);
            }
        }
        s_next
    }
}
