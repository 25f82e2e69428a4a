//! Incremental tabular Q-update kernels: QL, speedy QL, generalized speedy QL
//! and phase QL.
//!
//! Each kernel consumes one observed transition (phase QL instead draws `m`
//! generative samples) and writes exactly one `(s, a)` entry of the table.
//! Rewards arrive already subsidized; the kernels never see `λ`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{passive_subsidy, TabularMdp, Transition};
use crate::qtable::QTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("step size {0} must lie in (0, 1]")]
    InvalidStepSize(f64),
    #[error("relaxation w = {0} must be at least 1")]
    InvalidRelaxation(f64),
    #[error("phase QL needs at least one sample per step")]
    NoSamples,
    #[error("discount {0} must lie in [0, 1)")]
    InvalidDiscount(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ql,
    Sql,
    Gsql,
    #[serde(rename = "phaseql")]
    PhaseQl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ql, Variant::Sql, Variant::Gsql, Variant::PhaseQl];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ql => "ql",
            Variant::Sql => "sql",
            Variant::Gsql => "gsql",
            Variant::PhaseQl => "phaseql",
        }
    }

    /// Speedy variants keep the previous table.
    pub fn keeps_previous(self) -> bool {
        matches!(self, Variant::Sql | Variant::Gsql)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ql" => Ok(Variant::Ql),
            "sql" => Ok(Variant::Sql),
            "gsql" => Ok(Variant::Gsql),
            "phaseql" | "phase-ql" => Ok(Variant::PhaseQl),
            other => Err(format!("unknown learner variant `{other}`")),
        }
    }
}

/// Step-size schedule `α_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    Constant(f64),
    /// `α_n = 1 / (n + 1)` on the learner's global step counter.
    Harmonic,
}

impl StepSize {
    #[inline]
    pub fn at(self, n: u64) -> f64 {
        match self {
            StepSize::Constant(alpha) => alpha,
            StepSize::Harmonic => 1.0 / (n as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub variant: Variant,
    pub alpha: StepSize,
    /// Relaxation for GSQL, `w >= 1`.
    pub w: f64,
    /// Generative samples per phase-QL step.
    pub m: usize,
    pub discount: f64,
}

impl LearnerConfig {
    pub fn new(variant: Variant, alpha: f64, discount: f64) -> Self {
        Self {
            variant,
            alpha: StepSize::Constant(alpha),
            w: 1.0,
            m: 1,
            discount,
        }
    }

    pub fn with_relaxation(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn with_samples(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_step_size(mut self, alpha: StepSize) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if let StepSize::Constant(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(LearnerError::InvalidStepSize(alpha));
            }
        }
        if !(self.w >= 1.0 && self.w.is_finite()) {
            return Err(LearnerError::InvalidRelaxation(self.w));
        }
        if self.m == 0 {
            return Err(LearnerError::NoSamples);
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(LearnerError::InvalidDiscount(self.discount));
        }
        Ok(())
    }
}

/// Relaxation `w = 1 / (1 - β·p_min)` where `p_min` is the smallest
/// self-transition probability of the model.
pub fn default_relaxation(mdp: &TabularMdp) -> f64 {
    let p_min = mdp.min_self_transition();
    (1.0 / (1.0 - mdp.discount * p_min)).max(1.0)
}

/// How the value of the next state enters a backup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NextValue {
    /// `max_a' Q(s', a')`.
    Max,
    /// `min(v_max, max_a' Q(s', a'))`, used with UCB exploration.
    Clipped(f64),
}

impl NextValue {
    #[inline]
    pub fn of(self, q: &QTable, state: usize) -> f64 {
        match self {
            NextValue::Max => q.max_value(state),
            NextValue::Clipped(cap) => q.max_value(state).min(cap),
        }
    }
}

/// One-sample Bellman target `Γ Q(s, a) = r + β max_a' Q(s', a')`.
pub fn gamma_op(q: &QTable, t: &Transition, discount: f64) -> f64 {
    gamma_with(q, t, discount, NextValue::Max)
}

/// Relaxed target `T̂ Q(s, a) = w r + (1 - w + β w) max_a' Q(s', a')`.
pub fn that_op(q: &QTable, t: &Transition, discount: f64, w: f64) -> f64 {
    that_with(q, t, discount, w, NextValue::Max)
}

#[inline]
fn gamma_with(q: &QTable, t: &Transition, discount: f64, next: NextValue) -> f64 {
    t.reward + discount * next.of(q, t.next_state)
}

#[inline]
fn that_with(q: &QTable, t: &Transition, discount: f64, w: f64, next: NextValue) -> f64 {
    w * t.reward + (1.0 - w + discount * w) * next.of(q, t.next_state)
}

/// Table plus the auxiliary memory the update rules need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub q: QTable,
    /// `Q_{n-1}` for the speedy variants.
    pub q_prev: Option<QTable>,
    /// Global step counter `n`.
    pub step: u64,
    /// `N(s, a)`, row-major like the table.
    pub visit_counts: Vec<u64>,
    /// Pair written by the previous step; the only entry where `q_prev` and
    /// `q` may differ.
    last_pair: Option<(usize, usize)>,
}

impl LearnerState {
    /// Zero-initialized learner.
    pub fn new(cfg: &LearnerConfig, num_states: usize, num_actions: usize) -> Self {
        Self::with_initial(cfg, QTable::zeros(num_states, num_actions))
    }

    /// Learner starting from `q`; the speedy variants start with `Q_{-1} = Q_0`.
    pub fn with_initial(cfg: &LearnerConfig, q: QTable) -> Self {
        let q_prev = cfg.variant.keeps_previous().then(|| q.clone());
        let pairs = q.num_states() * q.num_actions();
        Self {
            q,
            q_prev,
            step: 0,
            visit_counts: vec![0; pairs],
            last_pair: None,
        }
    }

    #[inline]
    pub fn counts(&self, state: usize) -> &[u64] {
        let a = self.q.num_actions();
        &self.visit_counts[state * a..(state + 1) * a]
    }

    /// Clears the step counter and visit counts; the tables are kept.
    pub fn reset_counts(&mut self) {
        self.step = 0;
        self.visit_counts.iter_mut().for_each(|c| *c = 0);
    }

    #[inline]
    fn finish_step(&mut self, state: usize, action: usize) {
        self.visit_counts[state * self.q.num_actions() + action] += 1;
        self.step += 1;
    }

    /// Applies the configured incremental rule (QL, SQL or GSQL) to one
    /// observed transition. Phase QL needs generative access and goes
    /// through [`phase_step`](Self::phase_step); here it falls back to a
    /// one-sample replacement backup.
    pub fn observe(&mut self, t: &Transition, cfg: &LearnerConfig, next: NextValue) {
        match cfg.variant {
            Variant::Ql => self.ql_step(t, cfg, next),
            Variant::Sql => self.sql_step(t, cfg, next),
            Variant::Gsql => self.gsql_step(t, cfg, next),
            Variant::PhaseQl => {
                let target = gamma_with(&self.q, t, cfg.discount, next);
                self.q.set(t.state, t.action, target);
                self.finish_step(t.state, t.action);
            }
        }
    }

    /// `Q(s,a) ← Q(s,a) + α_n (Γ Q(s,a) − Q(s,a))`.
    pub fn ql_step(&mut self, t: &Transition, cfg: &LearnerConfig, next: NextValue) {
        let alpha = cfg.alpha.at(self.step);
        let old = self.q.get(t.state, t.action);
        let target = gamma_with(&self.q, t, cfg.discount, next);
        self.q.set(t.state, t.action, old + alpha * (target - old));
        self.finish_step(t.state, t.action);
    }

    /// `Q_{n+1} = Q_n + α_n (Γ Q_{n-1} − Q_n) + (1 − α_n)(Γ Q_n − Γ Q_{n-1})`,
    /// both targets built from the same sample.
    pub fn sql_step(&mut self, t: &Transition, cfg: &LearnerConfig, next: NextValue) {
        let discount = cfg.discount;
        self.speedy_step(t, cfg, |q| gamma_with(q, t, discount, next));
    }

    /// [`sql_step`](Self::sql_step) with `T̂` in place of `Γ`.
    pub fn gsql_step(&mut self, t: &Transition, cfg: &LearnerConfig, next: NextValue) {
        let (discount, w) = (cfg.discount, cfg.w);
        self.speedy_step(t, cfg, |q| that_with(q, t, discount, w, next));
    }

    fn speedy_step<F>(&mut self, t: &Transition, cfg: &LearnerConfig, target: F)
    where
        F: Fn(&QTable) -> f64,
    {
        let alpha = cfg.alpha.at(self.step);
        let (s, a) = (t.state, t.action);
        let q_prev = self.q_prev.get_or_insert_with(|| self.q.clone());
        let old = self.q.get(s, a);
        let target_prev = target(q_prev);
        let target_now = target(&self.q);
        let new = old + alpha * (target_prev - old) + (1.0 - alpha) * (target_now - target_prev);

        // q_prev must equal Q_n after the write: it already matches q
        // everywhere except the previously written pair.
        if let Some((ls, la)) = self.last_pair {
            q_prev.set(ls, la, self.q.get(ls, la));
        }
        q_prev.set(s, a, old);
        self.q.set(s, a, new);
        self.last_pair = Some((s, a));
        self.finish_step(s, a);
    }

    /// Phase-QL replacement backup of the visited pair:
    /// `Q(s,a) ← reward + β (1/m) Σ_i V(s_i)` over `m` fresh draws `s_i ~ p^a(s, ·)`.
    ///
    /// `reward` is supplied by the caller so a subsidy can be folded in.
    #[allow(clippy::too_many_arguments)]
    pub fn phase_step<R: Rng + ?Sized>(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        env: &TabularMdp,
        rng: &mut R,
        cfg: &LearnerConfig,
        next: NextValue,
    ) {
        let m = cfg.m.max(1);
        let mut total = 0.0;
        for _ in 0..m {
            let s_next = env.draw_next_state(state, action, rng);
            total += next.of(&self.q, s_next);
        }
        self.q
            .set(state, action, reward + cfg.discount * total / m as f64);
        self.finish_step(state, action);
    }
}

/// Exact-expectation phase-QL sweep: every pair is replaced by its
/// kernel-weighted backup, computed from the same input table.
pub fn phase_sweep_expected(q: &QTable, env: &TabularMdp, subsidy: f64) -> QTable {
    let values = q.state_values();
    let mut out = q.clone();
    for s in 0..env.num_states {
        for a in 0..env.num_actions {
            let mean: f64 = env.row(a, s).iter().zip(&values).map(|(p, v)| p * v).sum();
            out.set(
                s,
                a,
                env.reward(s, a) + passive_subsidy(a, subsidy) + env.discount * mean,
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::five_state_example;
    use crate::oracle::solve_q;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn t(state: usize, action: usize, reward: f64, next_state: usize) -> Transition {
        Transition {
            state,
            action,
            reward,
            next_state,
        }
    }

    fn table() -> QTable {
        QTable::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.25]])
    }

    #[test]
    fn gamma_reduces_to_reward() {
        let q = table();
        assert_eq!(gamma_op(&q, &t(0, 0, 0.7, 1), 0.0), 0.7);
        assert_eq!(gamma_op(&QTable::zeros(3, 2), &t(0, 0, 0.7, 1), 0.9), 0.7);
        assert_eq!(gamma_op(&q, &t(0, 0, 0.7, 1), 0.5), 0.7 + 1.5);
    }

    #[test]
    fn relaxed_operator_special_cases() {
        let q = table();
        let tr = t(2, 1, 0.4, 0);
        assert_eq!(that_op(&q, &tr, 0.9, 1.0), gamma_op(&q, &tr, 0.9));
        assert_eq!(that_op(&q, &tr, 0.0, 2.0), 2.0 * 0.4 - 2.0);
        let c = QTable::filled(3, 2, 1.5);
        assert_abs_diff_eq!(
            that_op(&c, &tr, 0.9, 1.3),
            1.3 * 0.4 + (1.0 - 1.3 + 0.9 * 1.3) * 1.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn one_sample_target_averages_to_q_star() {
        let mdp = five_state_example();
        let q_star = solve_q(&mdp, 0.0, 1e-12).unwrap().q;
        for s in 0..5 {
            for a in 0..2 {
                let expected: f64 = (0..5)
                    .map(|s2| mdp.row(a, s)[s2] * gamma_op(&q_star, &t(s, a, mdp.reward(s, a), s2), 0.9))
                    .sum();
                assert_abs_diff_eq!(expected, q_star.get(s, a), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ql_single_step_with_full_step_size() {
        let cfg = LearnerConfig::new(Variant::Ql, 1.0, 0.0);
        let mut st = LearnerState::new(&cfg, 3, 2);
        st.ql_step(&t(1, 0, 0.8, 2), &cfg, NextValue::Max);
        assert_eq!(st.q.get(1, 0), 0.8);
        assert_eq!(st.step, 1);
        assert_eq!(st.counts(1), &[1, 0]);
        let changed = st.q.values().iter().filter(|v| **v != 0.0).count();
        assert_eq!(changed, 1);
    }

    #[test]
    fn ql_expected_increment_vanishes_at_fixed_point() {
        let mdp = five_state_example();
        let q_star = solve_q(&mdp, 0.0, 1e-12).unwrap().q;
        let cfg = LearnerConfig::new(Variant::Ql, 0.3, 0.9);
        for s in 0..5 {
            for a in 0..2 {
                let mean: f64 = (0..5)
                    .map(|s2| {
                        let mut st = LearnerState::with_initial(&cfg, q_star.clone());
                        st.ql_step(&t(s, a, mdp.reward(s, a), s2), &cfg, NextValue::Max);
                        mdp.row(a, s)[s2] * (st.q.get(s, a) - q_star.get(s, a))
                    })
                    .sum();
                assert!(mean.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ql_steps_on_disjoint_pairs_commute() {
        let cfg = LearnerConfig::new(Variant::Ql, 0.4, 0.9);
        let (t1, t2) = (t(0, 0, 1.0, 1), t(2, 1, -0.5, 1));
        let mut a = LearnerState::with_initial(&cfg, table());
        a.ql_step(&t1, &cfg, NextValue::Max);
        a.ql_step(&t2, &cfg, NextValue::Max);
        let mut b = LearnerState::with_initial(&cfg, table());
        b.ql_step(&t2, &cfg, NextValue::Max);
        b.ql_step(&t1, &cfg, NextValue::Max);
        // Neither pair is read by the other's target.
        assert_eq!(a.q, b.q);
    }

    #[test]
    fn sql_first_step_equals_ql() {
        let ql = LearnerConfig::new(Variant::Ql, 0.3, 0.9);
        let sql = LearnerConfig::new(Variant::Sql, 0.3, 0.9);
        let tr = t(1, 1, 0.6, 0);
        let mut a = LearnerState::with_initial(&ql, table());
        let mut b = LearnerState::with_initial(&sql, table());
        a.ql_step(&tr, &ql, NextValue::Max);
        b.sql_step(&tr, &sql, NextValue::Max);
        assert_abs_diff_eq!(a.q.get(1, 1), b.q.get(1, 1), epsilon = 1e-15);
        assert_eq!(b.q_prev.as_ref().unwrap().get(1, 1), -1.0);
    }

    #[test]
    fn sql_with_unit_step_uses_older_target() {
        let cfg = LearnerConfig::new(Variant::Sql, 1.0, 0.5);
        let mut st = LearnerState::with_initial(&cfg, table());
        let mut prev = table();
        prev.set(0, 1, 4.0);
        st.q_prev = Some(prev.clone());
        let tr = t(2, 0, 1.0, 0);
        st.sql_step(&tr, &cfg, NextValue::Max);
        assert_eq!(st.q.get(2, 0), gamma_op(&prev, &tr, 0.5));
    }

    #[test]
    fn sql_previous_table_tracks_last_iterate() {
        let cfg = LearnerConfig::new(Variant::Sql, 0.2, 0.9);
        let mdp = five_state_example();
        let mut st = LearnerState::new(&cfg, 5, 2);
        let mut rng = RngStream::new(5);
        let mut s = 0;
        for i in 0..200 {
            let before = st.q.clone();
            let tr = mdp.sample_next(s, i % 2, &mut rng).unwrap();
            st.sql_step(&tr, &cfg, NextValue::Max);
            assert_eq!(st.q_prev.as_ref().unwrap(), &before);
            s = tr.next_state;
        }
    }

    #[test]
    fn harmonic_schedule_starts_at_one() {
        assert_eq!(StepSize::Harmonic.at(0), 1.0);
        assert_eq!(StepSize::Harmonic.at(3), 0.25);
        assert_eq!(StepSize::Constant(0.02).at(1000), 0.02);
    }

    #[test]
    fn phase_step_with_deterministic_row_is_exact_backup() {
        let env = TabularMdp::new(
            vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            vec![vec![1.0], vec![2.0]],
            0.9,
        )
        .unwrap();
        let cfg = LearnerConfig::new(Variant::PhaseQl, 0.5, 0.9).with_samples(7);
        let mut st = LearnerState::with_initial(&cfg, QTable::from_rows(&[vec![3.0], vec![5.0]]));
        let mut rng = RngStream::new(0);
        st.phase_step(0, 0, 1.0, &env, &mut rng, &cfg, NextValue::Max);
        assert_abs_diff_eq!(st.q.get(0, 0), 1.0 + 0.9 * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_step_without_discount_is_reward() {
        let mut env = five_state_example();
        env.discount = 0.0;
        let cfg = LearnerConfig::new(Variant::PhaseQl, 0.5, 0.0).with_samples(20);
        let mut st = LearnerState::with_initial(&cfg, QTable::filled(5, 2, 9.0));
        let mut rng = RngStream::new(0);
        st.phase_step(3, 1, env.reward(3, 1), &env, &mut rng, &cfg, NextValue::Max);
        assert_eq!(st.q.get(3, 1), env.reward(3, 1));
    }

    #[test]
    fn clipped_next_value_caps_the_target() {
        let q = table();
        assert_eq!(NextValue::Clipped(10.0).of(&q, 1), 3.0);
        assert_eq!(NextValue::Clipped(2.5).of(&q, 1), 2.5);
    }

    #[test]
    fn config_validation() {
        let ok = LearnerConfig::new(Variant::Gsql, 0.02, 0.9).with_relaxation(1.1);
        assert!(ok.validate().is_ok());
        assert!(LearnerConfig::new(Variant::Ql, 0.0, 0.9).validate().is_err());
        assert!(LearnerConfig::new(Variant::Ql, 1.5, 0.9).validate().is_err());
        assert!(ok.with_relaxation(0.9).validate().is_err());
        assert!(ok.with_samples(0).validate().is_err());
        assert!(LearnerConfig::new(Variant::Ql, 0.1, 1.0).validate().is_err());
    }

    #[test]
    fn default_relaxation_on_fixture() {
        let mdp = five_state_example();
        // Smallest self-transition is 0.1 (active action, state 3).
        assert_abs_diff_eq!(default_relaxation(&mdp), 1.0 / (1.0 - 0.09), epsilon = 1e-12);
    }

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("dqn".parse::<Variant>().is_err());
    }
}
