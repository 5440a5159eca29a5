//! Exact dynamic-programming oracles and the error analysis of in-context
//! Bellman updates.

mod bounds;
mod ledger;

use thiserror::Error;

use crate::env::{EnvId, EnvState, FeatureRow, MdpSpec};
use crate::regressor::{Regressor, RegressorError};
use crate::replay::{empirical_next_dist, Context, ReplayError};

pub use bounds::{asymptotic_suboptimality, eps_stat_bound, theorem1_rhs, theorem2_samples};
pub use ledger::{ErrorLedger, LedgerRow, LedgerTracker};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("table is {got:?}, model is {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("gamma {0} outside [0, 1)")]
    Gamma(f64),
    #[error("{0}")]
    Domain(String),
    #[error("{0} overflows; the bound is unbounded in this regime")]
    Overflow(&'static str),
    #[error("value iteration did not reach tolerance in {0} sweeps")]
    NoConvergence(usize),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Dense action-value table indexed `(state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_states * n_actions, "table size");
        Self { n_states, n_actions, values }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, lowest index on ties.
    pub fn greedy(&self, s: usize) -> usize {
        crate::argmax(self.row(s))
    }

    pub fn sup_dist(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &QTable) -> QTable {
        QTable { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &QTable) -> QTable {
        QTable { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(), ..self.clone() }
    }
}

fn check_dims(q: &QTable, mdp: &MdpSpec) -> Result<(), TheoryError> {
    if (q.n_states, q.n_actions) != (mdp.n_states, mdp.n_actions) {
        return Err(TheoryError::DimensionMismatch {
            expected: (mdp.n_states, mdp.n_actions),
            got: (q.n_states, q.n_actions),
        });
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<(), TheoryError> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(TheoryError::Gamma(gamma))
    }
}

/// (TQ)(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) max_a' Q(s',a').
pub fn bellman_apply(q: &QTable, mdp: &MdpSpec, gamma: f64) -> Result<QTable, TheoryError> {
    check_dims(q, mdp)?;
    let v: Vec<f64> = (0..mdp.n_states).map(|s| q.max(s)).collect();
    let values = (0..mdp.n_states * mdp.n_actions)
        .map(|sa| mdp.reward[sa] + gamma * mdp.transitions[sa].iter().map(|&(n, p)| p * v[n]).sum::<f64>())
        .collect();
    Ok(QTable { values, ..q.clone() })
}

const VI_MAX_SWEEPS: usize = 1_000_000;

/// Iterates T from zero until the residual certifies `tol` accuracy
/// (residual <= tol (1 - gamma) / gamma), then returns one more application.
/// The result satisfies both ||TQ - Q|| <= tol and ||Q - Q*|| <= tol.
pub fn value_iteration(mdp: &MdpSpec, gamma: f64, tol: f64) -> Result<QTable, TheoryError> {
    check_gamma(gamma)?;
    if !(tol > 0.0) {
        return Err(TheoryError::Domain(format!("tolerance {tol} must be positive")));
    }
    let stop = if gamma == 0.0 { f64::INFINITY } else { tol * (1.0 - gamma) / gamma };
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..VI_MAX_SWEEPS {
        let next = bellman_apply(&q, mdp, gamma)?;
        let residual = next.sup_dist(&q);
        q = next;
        if residual <= stop {
            return bellman_apply(&q, mdp, gamma);
        }
    }
    Err(TheoryError::NoConvergence(VI_MAX_SWEEPS))
}

/// Q^pi of a deterministic policy by iterating its evaluation operator.
pub fn policy_q(mdp: &MdpSpec, policy: &[usize], gamma: f64, tol: f64) -> Result<QTable, TheoryError> {
    check_gamma(gamma)?;
    let stop = if gamma == 0.0 { f64::INFINITY } else { tol * (1.0 - gamma) / gamma };
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..VI_MAX_SWEEPS {
        let values: Vec<f64> = (0..mdp.n_states * mdp.n_actions)
            .map(|sa| {
                mdp.reward[sa] + gamma * mdp.transitions[sa].iter().map(|&(n, p)| p * q.get(n, policy[n])).sum::<f64>()
            })
            .collect();
        let next = QTable { values, ..q.clone() };
        let residual = next.sup_dist(&q);
        q = next;
        if residual <= stop {
            return Ok(q);
        }
    }
    Err(TheoryError::NoConvergence(VI_MAX_SWEEPS))
}

/// Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a')); a
/// terminal transition bootstraps from 0.
pub fn tabular_q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: Option<usize>,
    alpha: f64,
    gamma: f64,
) -> Result<(), TheoryError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TheoryError::Domain(format!("step size {alpha} outside [0, 1]")));
    }
    let bootstrap = s_next.map_or(0.0, |n| q.max(n));
    let old = q.get(s, a);
    q.set(s, a, (1.0 - alpha) * old + alpha * (r + gamma * bootstrap));
    Ok(())
}

fn query_state(env: EnvId, s: usize) -> EnvState {
    EnvState::discrete(env, s, 0, s)
}

/// Regressor predictions f(C, s, a) for every state and action, queried at
/// episode step 0.
pub fn regressor_table(
    context: &Context,
    regressor: &mut Regressor,
    env: EnvId,
    n_states: usize,
    n_actions: usize,
) -> Result<QTable, TheoryError> {
    let queries: Vec<FeatureRow> = (0..n_states)
        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
        .map(|(s, a)| context.encoder().encode(&query_state(env, s), a))
        .collect();
    Ok(QTable::from_values(n_states, n_actions, regressor.predict(&context.rows, &queries)?))
}

/// Result of the empirical Bellman operator, with the smallest per-query
/// sample count it used.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBellman {
    pub table: QTable,
    pub m_min: usize,
}

/// (T_C Q)(s,a) = sum_s' P_C(s'|s,a) [r(s,a) + gamma f(C, s', a*_Q(s'))].
/// Queries without an exact (s,a) match use the `m_min` nearest context
/// transitions and count as `m_min` samples.
pub fn empirical_bellman_apply(
    q: &QTable,
    context: &Context,
    regressor: &mut Regressor,
    mdp: &MdpSpec,
    env: EnvId,
    gamma: f64,
    m_min: usize,
) -> Result<EmpiricalBellman, TheoryError> {
    check_dims(q, mdp)?;
    let queries: Vec<FeatureRow> =
        (0..mdp.n_states).map(|s| context.encoder().encode(&query_state(env, s), q.greedy(s))).collect();
    let next_value = if gamma == 0.0 { vec![0.0; mdp.n_states] } else { regressor.predict(&context.rows, &queries)? };
    let mut values = Vec::with_capacity(mdp.n_states * mdp.n_actions);
    let mut smallest = usize::MAX;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let dist = empirical_next_dist(context, &query_state(env, s), a, m_min)?;
            smallest = smallest.min(if dist.exact_matches == 0 { m_min } else { dist.exact_matches });
            let r = mdp.reward[mdp.sa(s, a)];
            values.push(dist.outcomes.iter().map(|&(n, p)| p * (r + gamma * next_value[n])).sum());
        }
    }
    Ok(EmpiricalBellman { table: QTable::from_values(mdp.n_states, mdp.n_actions, values), m_min: smallest })
}

/// The three terms of Q_next - Q* = (TQ_t - TQ*) + (T_C Q_t - TQ_t) + (Q_next - T_C Q_t).
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub contraction: QTable,
    pub stat: QTable,
    pub icl: QTable,
    pub m_min: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn error_decompose(
    q_t: &QTable,
    q_next: &QTable,
    q_star: &QTable,
    context: &Context,
    regressor: &mut Regressor,
    mdp: &MdpSpec,
    env: EnvId,
    gamma: f64,
    m_min: usize,
) -> Result<Decomposition, TheoryError> {
    for t in [q_next, q_star] {
        check_dims(t, mdp)?;
    }
    let t_q = bellman_apply(q_t, mdp, gamma)?;
    let t_star = bellman_apply(q_star, mdp, gamma)?;
    let emp = empirical_bellman_apply(q_t, context, regressor, mdp, env, gamma, m_min)?;
    Ok(Decomposition {
        contraction: t_q.sub(&t_star),
        stat: emp.table.sub(&t_q),
        icl: q_next.sub(&emp.table),
        m_min: emp.m_min,
    })
}
