//! Model-based ground truth.
//!
//! Q-value iteration for the subsidized problem
//!
//! ```text
//! Q^λ(s, a) = r(s, a) + (1 - a)·λ + β Σ_s' p^a(s, s') max_a' Q^λ(s', a')
//! ```
//!
//! (λ = 0 gives the plain optimal Q*), a direct linear solve for the value of
//! a fixed policy, and Whittle indices by bisection on the action gap
//! `d(λ) = Q^λ(s, 1) - Q^λ(s, 0)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{passive_subsidy, MdpError, TabularMdp};
use crate::qtable::QTable;

/// Value iteration gives up after this many sweeps.
pub const MAX_VALUE_ITERATIONS: usize = 1_000_000;
/// Bisection gives up after this many halvings.
pub const MAX_BISECTION_STEPS: usize = 200;
/// Default bracket half-width is `r_max / (1 - β)`; automatic widening stops
/// at this multiple of it.
pub const BRACKET_WIDENING_LIMIT: f64 = 8.0;
pub const DEFAULT_INDEX_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] MdpError),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("value iteration did not reach residual {tol} within {iterations} sweeps (last residual {residual})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("subsidized index needs a two-action arm, model has {0} actions")]
    NotTwoAction(usize),
    #[error("action gap of state {state} keeps one sign on [{lo}, {hi}] (d = {d_lo}, {d_hi}); the arm may not be indexable")]
    NoSignChange {
        state: usize,
        lo: f64,
        hi: f64,
        d_lo: f64,
        d_hi: f64,
    },
    #[error("bisection for state {state} stalled at λ = {lambda} with |d| = {residual}")]
    BisectionStalled {
        state: usize,
        lambda: f64,
        residual: f64,
    },
    #[error("policy has {got} entries for {expected} states")]
    PolicyShape { got: usize, expected: usize },
    #[error("policy evaluation system is singular")]
    Singular,
}

/// Converged table plus solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSolution {
    pub q: QTable,
    pub iterations: usize,
    /// Sup-norm of `T q - q` for the returned table.
    pub residual: f64,
}

/// One synchronous Bellman optimality backup of `q` under subsidy `λ`.
pub fn bellman_backup(mdp: &TabularMdp, q: &QTable, subsidy: f64) -> QTable {
    let values = q.state_values();
    let mut out = QTable::zeros(mdp.num_states, mdp.num_actions);
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let future: f64 = mdp.row(a, s).iter().zip(&values).map(|(p, v)| p * v).sum();
            out.set(
                s,
                a,
                mdp.reward(s, a) + passive_subsidy(a, subsidy) + mdp.discount * future,
            );
        }
    }
    out
}

/// Sup-norm of one backup minus the table.
pub fn bellman_residual(mdp: &TabularMdp, q: &QTable, subsidy: f64) -> f64 {
    bellman_backup(mdp, q, subsidy).sup_diff(q)
}

/// Fixed point of the subsidized Bellman operator, to Bellman residual `tol`.
pub fn solve_q(mdp: &TabularMdp, subsidy: f64, tol: f64) -> Result<QSolution, OracleError> {
    solve_q_from(mdp, subsidy, tol, QTable::zeros(mdp.num_states, mdp.num_actions))
}

/// [`solve_q`] warm-started from `init`.
pub fn solve_q_from(
    mdp: &TabularMdp,
    subsidy: f64,
    tol: f64,
    init: QTable,
) -> Result<QSolution, OracleError> {
    mdp.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OracleError::InvalidTolerance(tol));
    }
    let mut q = init;
    let mut residual = f64::INFINITY;
    for iteration in 0..MAX_VALUE_ITERATIONS {
        let next = bellman_backup(mdp, &q, subsidy);
        residual = next.sup_diff(&q);
        if residual <= tol {
            trace_iterations(iteration, residual);
            return Ok(QSolution {
                q,
                iterations: iteration,
                residual,
            });
        }
        q = next;
    }
    Err(OracleError::NotConverged {
        iterations: MAX_VALUE_ITERATIONS,
        residual,
        tol,
    })
}

/// Exact value of a stationary deterministic policy, by solving
/// `(I - β P_π) v = r_π` directly.
pub fn policy_value(mdp: &TabularMdp, policy: &[usize], subsidy: f64) -> Result<Vec<f64>, OracleError> {
    mdp.validate()?;
    let k = mdp.num_states;
    if policy.len() != k {
        return Err(OracleError::PolicyShape {
            got: policy.len(),
            expected: k,
        });
    }
    for &a in policy {
        mdp.check_action(a)?;
    }
    let system = DMatrix::from_fn(k, k, |s, next| {
        let identity = if s == next { 1.0 } else { 0.0 };
        identity - mdp.discount * mdp.row(policy[s], s)[next]
    });
    let rhs = DVector::from_fn(k, |s, _| {
        mdp.reward(s, policy[s]) + passive_subsidy(policy[s], subsidy)
    });
    system
        .lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or(OracleError::Singular)
}

/// Default search interval `±r_max / (1 - β)`, with `r_max` the largest
/// absolute reward.
pub fn default_bracket(mdp: &TabularMdp) -> (f64, f64) {
    let bound = (mdp.max_abs_reward() / (1.0 - mdp.discount)).max(1.0);
    (-bound, bound)
}

/// Bisection result for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub lambda: f64,
    /// `|d(λ)|` at the returned λ.
    pub residual: f64,
    pub steps: usize,
    /// The bracket bisection actually started from, after any widening.
    pub bracket: (f64, f64),
}

/// Whittle indices of every state with their residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhittleIndexVector {
    pub index: Vec<f64>,
    pub residual: Vec<f64>,
    pub tolerance: f64,
}

/// Action gap `Q^λ(s, 1) - Q^λ(s, 0)` at subsidy `λ`, with the value
/// iteration run tight enough that its error is well below `tol`.
pub fn action_gap(mdp: &TabularMdp, state: usize, subsidy: f64, tol: f64) -> Result<f64, OracleError> {
    if mdp.num_actions != 2 {
        return Err(OracleError::NotTwoAction(mdp.num_actions));
    }
    mdp.check_state(state)?;
    let inner_tol = (tol * (1.0 - mdp.discount) * 1e-2).max(1e-13);
    let sol = solve_q(mdp, subsidy, inner_tol)?;
    Ok(sol.q.get(state, 1) - sol.q.get(state, 0))
}

/// Whittle index of `state`: the subsidy at which both actions are equally
/// valuable, located by bisection on the action gap.
///
/// The bracket defaults to [`default_bracket`]. If the gap has the same sign
/// at both ends the bracket is widened (doubling) up to
/// [`BRACKET_WIDENING_LIMIT`] times the default half-width; persisting
/// failure is reported as [`OracleError::NoSignChange`].
pub fn whittle_index(
    mdp: &TabularMdp,
    state: usize,
    tol: f64,
    bracket: Option<(f64, f64)>,
) -> Result<IndexEstimate, OracleError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OracleError::InvalidTolerance(tol));
    }
    if mdp.num_actions != 2 {
        return Err(OracleError::NotTwoAction(mdp.num_actions));
    }
    mdp.check_state(state)?;
    let (default_lo, default_hi) = default_bracket(mdp);
    let bracket = bracket.unwrap_or((default_lo, default_hi));
    let limit = (BRACKET_WIDENING_LIMIT * default_hi)
        .max(bracket.0.abs())
        .max(bracket.1.abs());
    bisect_root(|lambda| action_gap(mdp, state, lambda, tol), bracket, limit, tol)
        .map_err(|e| e.for_state(state))
}

enum BisectError {
    Oracle(OracleError),
    NoSignChange { lo: f64, hi: f64, d_lo: f64, d_hi: f64 },
    Stalled { lambda: f64, residual: f64 },
}

impl BisectError {
    fn for_state(self, state: usize) -> OracleError {
        match self {
            BisectError::Oracle(e) => e,
            BisectError::NoSignChange { lo, hi, d_lo, d_hi } => OracleError::NoSignChange {
                state,
                lo,
                hi,
                d_lo,
                d_hi,
            },
            BisectError::Stalled { lambda, residual } => OracleError::BisectionStalled {
                state,
                lambda,
                residual,
            },
        }
    }
}

/// Finds `x` with `|f(x)| <= tol`, widening `bracket` (doubling, clamped to
/// `±limit`) until `f` changes sign.
fn bisect_root<F>(
    mut f: F,
    bracket: (f64, f64),
    limit: f64,
    tol: f64,
) -> Result<IndexEstimate, BisectError>
where
    F: FnMut(f64) -> Result<f64, OracleError>,
{
    let mut eval = |x: f64| f(x).map_err(BisectError::Oracle);
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let mut d_lo = eval(lo)?;
    let mut d_hi = eval(hi)?;
    while d_lo.signum() == d_hi.signum() && d_lo != 0.0 && d_hi != 0.0 {
        if lo <= -limit && hi >= limit {
            return Err(BisectError::NoSignChange { lo, hi, d_lo, d_hi });
        }
        let width = (hi - lo).max(1.0);
        lo = (lo - width).max(-limit);
        hi = (hi + width).min(limit);
        d_lo = eval(lo)?;
        d_hi = eval(hi)?;
    }
    let bracket = (lo, hi);
    if d_lo.abs() <= tol {
        return Ok(IndexEstimate { lambda: lo, residual: d_lo.abs(), steps: 0, bracket });
    }
    if d_hi.abs() <= tol {
        return Ok(IndexEstimate { lambda: hi, residual: d_hi.abs(), steps: 0, bracket });
    }
    let mut best = (lo, d_lo.abs());
    for step in 1..=MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let d_mid = eval(mid)?;
        if d_mid.abs() < best.1 {
            best = (mid, d_mid.abs());
        }
        if d_mid.abs() <= tol {
            return Ok(IndexEstimate {
                lambda: mid,
                residual: d_mid.abs(),
                steps: step,
                bracket,
            });
        }
        if d_mid.signum() == d_lo.signum() {
            lo = mid;
            d_lo = d_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    Err(BisectError::Stalled {
        lambda: best.0,
        residual: best.1,
    })
}

/// [`whittle_index`] for every state with the default bracket.
pub fn whittle_indices(mdp: &TabularMdp, tol: f64) -> Result<WhittleIndexVector, OracleError> {
    let mut index = Vec::with_capacity(mdp.num_states);
    let mut residual = Vec::with_capacity(mdp.num_states);
    for s in 0..mdp.num_states {
        let est = whittle_index(mdp, s, tol, None)?;
        index.push(est.lambda);
        residual.push(est.residual);
    }
    Ok(WhittleIndexVector {
        index,
        residual,
        tolerance: tol,
    })
}

/// Exportable oracle results for one model and subsidy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub subsidy: f64,
    pub q: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub greedy_policy: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub whittle: Option<WhittleIndexVector>,
}

impl OracleReport {
    pub fn from_solution(sol: &QSolution, subsidy: f64) -> Self {
        Self {
            subsidy,
            q: sol.q.to_rows(),
            values: sol.q.state_values(),
            greedy_policy: sol.q.greedy_policy(),
            iterations: sol.iterations,
            residual: sol.residual,
            whittle: None,
        }
    }
}

/// Prints solver iteration counts when `RMAB_TRACE_SOLVER` is set.
fn trace_iterations(iterations: usize, residual: f64) {
    if std::env::var_os("RMAB_TRACE_SOLVER").is_some() {
        eprintln!("value iteration converged: {iterations} sweeps, residual {residual:.3e}");
    }
}
