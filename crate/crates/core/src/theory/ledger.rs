//! Per-refit error bookkeeping against the exact Q*.

use super::{error_decompose, regressor_table, theorem1_rhs, QTable, TheoryError};
use crate::env::{EnvId, MdpSpec};
use crate::regressor::Regressor;
use crate::replay::Context;

/// Row t describes the estimate after t in-context updates: the errors of
/// the update that produced it, its distance to Q*, and the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub step: u64,
    pub eps_icl: f64,
    pub eps_stat: f64,
    pub eps_label: f64,
    pub m_min: usize,
    pub sup_err: f64,
    pub theorem1_rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorLedger {
    pub rows: Vec<LedgerRow>,
}

impl ErrorLedger {
    /// Fraction of rows whose measured error respects the bound (with a
    /// 1e-12 floating-point slack).
    pub fn bound_hold_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        let ok = self.rows.iter().filter(|r| r.sup_err <= r.theorem1_rhs + 1e-12).count();
        ok as f64 / self.rows.len() as f64
    }
}

/// Follows a run after the switch: Q_0 is the teacher's table at the
/// switch, and every context rebuild produces Q_{t+1} = f(C_t, ., .).
#[derive(Debug)]
pub struct LedgerTracker {
    mdp: MdpSpec,
    env: EnvId,
    gamma: f64,
    m_min: usize,
    q_star: QTable,
    current: QTable,
    initial_err: f64,
    eps_label: f64,
    eps_icl: Vec<f64>,
    eps_stat: Vec<f64>,
    pub ledger: ErrorLedger,
}

impl LedgerTracker {
    /// `q_star` must be the optimum of `mdp` under `gamma`; `teacher` is
    /// the warm-up network's table at the switch.
    pub fn start(
        mdp: MdpSpec,
        env: EnvId,
        gamma: f64,
        m_min: usize,
        q_star: QTable,
        teacher: QTable,
        step: u64,
    ) -> Self {
        let initial_err = teacher.sup_dist(&q_star);
        let mut tracker = Self {
            mdp,
            env,
            gamma,
            m_min,
            q_star,
            current: teacher,
            initial_err,
            eps_label: initial_err,
            eps_icl: Vec::new(),
            eps_stat: Vec::new(),
            ledger: ErrorLedger::default(),
        };
        tracker.ledger.rows.push(LedgerRow {
            step,
            eps_icl: 0.0,
            eps_stat: 0.0,
            eps_label: tracker.eps_label,
            m_min: 0,
            sup_err: initial_err,
            theorem1_rhs: initial_err,
        });
        tracker
    }

    pub fn q_star(&self) -> &QTable {
        &self.q_star
    }

    pub fn current(&self) -> &QTable {
        &self.current
    }

    /// Records the update Q_t -> f(C_t, ., .).
    pub fn record(&mut self, step: u64, context: &Context, regressor: &mut Regressor) -> Result<(), TheoryError> {
        let next = regressor_table(context, regressor, self.env, self.mdp.n_states, self.mdp.n_actions)?;
        let d = error_decompose(
            &self.current,
            &next,
            &self.q_star,
            context,
            regressor,
            &self.mdp,
            self.env,
            self.gamma,
            self.m_min,
        )?;
        self.eps_icl.push(d.icl.sup_norm());
        self.eps_stat.push(d.stat.sup_norm());
        let t = self.eps_icl.len();
        let rhs = theorem1_rhs(t, self.initial_err, &self.eps_icl, &self.eps_stat, self.gamma)?;
        self.ledger.rows.push(LedgerRow {
            step,
            eps_icl: self.eps_icl[t - 1],
            eps_stat: self.eps_stat[t - 1],
            eps_label: self.eps_label,
            m_min: d.m_min,
            sup_err: next.sup_dist(&self.q_star),
            theorem1_rhs: rhs,
        });
        self.current = next;
        Ok(())
    }
}
