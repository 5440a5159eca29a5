//! In-context regressors f(C, s, a): the k-NN and Gaussian-kernel
//! surrogates, a client for an external model process, and an exact table
//! used as a test oracle.

pub mod bridge;
mod kernel;
mod knn;
mod rows;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::env::{EnvState, FeatureEncoder, FeatureRow};
use crate::theory::QTable;

pub use bridge::BridgeClient;
pub use rows::RowSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("context is empty")]
    EmptyContext,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("context row without a label")]
    MissingLabel,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("no table entry for query {0:?}")]
    MissingKey(Option<(usize, usize)>),
    #[error("bridge unreachable: {0}")]
    Unreachable(String),
    #[error("malformed bridge reply: {0}")]
    Malformed(String),
    #[error("bridge error {code}: {message}")]
    Remote { code: String, message: String },
    #[error("invalid regressor setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegressorKind {
    Knn {
        k: usize,
    },
    Kernel {
        bandwidth: f64,
    },
    Bridge {
        endpoint: String,
    },
    /// Lookup in a supplied Q-table, or per-(s,a) label averages when no
    /// table is supplied.
    ExactTable,
}

impl Default for RegressorKind {
    fn default() -> Self {
        RegressorKind::Knn { k: 8 }
    }
}

impl RegressorKind {
    pub fn validate(&self) -> Result<(), RegressorError> {
        match self {
            RegressorKind::Knn { k: 0 } => Err(RegressorError::Invalid("knn k must be at least 1".into())),
            RegressorKind::Kernel { bandwidth } if !(*bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(RegressorError::Invalid(format!("bandwidth {bandwidth} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorKind::Knn { .. } => f.write_str("knn"),
            RegressorKind::Kernel { .. } => f.write_str("kernel"),
            RegressorKind::Bridge { .. } => f.write_str("bridge"),
            RegressorKind::ExactTable => f.write_str("exact_table"),
        }
    }
}

/// A frozen regressor. Only the bridge variant holds live state (its
/// connection); predictions never depend on earlier calls.
#[derive(Debug)]
pub enum Regressor {
    Knn { k: usize },
    Kernel { bandwidth: f64 },
    Bridge(BridgeClient),
    ExactTable(Option<Arc<QTable>>),
}

impl Regressor {
    pub fn from_kind(kind: &RegressorKind) -> Result<Self, RegressorError> {
        kind.validate()?;
        Ok(match kind {
            RegressorKind::Knn { k } => Regressor::Knn { k: *k },
            RegressorKind::Kernel { bandwidth } => Regressor::Kernel { bandwidth: *bandwidth },
            RegressorKind::Bridge { endpoint } => Regressor::Bridge(BridgeClient::new(endpoint)?),
            RegressorKind::ExactTable => Regressor::ExactTable(None),
        })
    }

    pub fn exact_table(table: QTable) -> Self {
        Regressor::ExactTable(Some(Arc::new(table)))
    }

    pub fn predict(&mut self, context: &RowSet, queries: &[FeatureRow]) -> Result<Vec<f64>, RegressorError> {
        if context.is_empty() {
            return Err(RegressorError::EmptyContext);
        }
        let n_feat = context.n_feat();
        if let Some(q) = queries.iter().find(|q| q.features.len() != n_feat) {
            return Err(RegressorError::DimensionMismatch(format!(
                "query has {} features, context {n_feat}",
                q.features.len()
            )));
        }
        match self {
            Regressor::Knn { k } => Ok(queries.iter().map(|q| knn::predict_one(context, *k, &q.features)).collect()),
            Regressor::Kernel { bandwidth } => {
                Ok(queries.iter().map(|q| kernel::predict_one(context, *bandwidth, &q.features)).collect())
            }
            Regressor::Bridge(client) => client.predict(context, queries),
            Regressor::ExactTable(Some(table)) => queries
                .iter()
                .map(|q| match q.key {
                    Some((s, a)) if s < table.n_states() && a < table.n_actions() => Ok(table.get(s, a)),
                    key => Err(RegressorError::MissingKey(key)),
                })
                .collect(),
            Regressor::ExactTable(None) => {
                let mut sums: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
                for r in context.rows() {
                    if let Some(key) = r.key {
                        let e = sums.entry(key).or_insert((0.0, 0));
                        e.0 += r.label.unwrap();
                        e.1 += 1;
                    }
                }
                queries
                    .iter()
                    .map(|q| {
                        q.key
                            .and_then(|k| sums.get(&k))
                            .map(|(s, n)| s / *n as f64)
                            .ok_or(RegressorError::MissingKey(q.key))
                    })
                    .collect()
            }
        }
    }

    /// Predicted Q-value of every action in `state`.
    pub fn action_values(
        &mut self,
        context: &RowSet,
        state: &EnvState,
        n_actions: usize,
        encoder: &FeatureEncoder,
    ) -> Result<Vec<f64>, RegressorError> {
        let queries: Vec<FeatureRow> = (0..n_actions).map(|a| encoder.encode(state, a)).collect();
        self.predict(context, &queries)
    }

    /// Greedy action with lowest-index tie-break.
    pub fn greedy_action(
        &mut self,
        context: &RowSet,
        state: &EnvState,
        n_actions: usize,
        encoder: &FeatureEncoder,
    ) -> Result<usize, RegressorError> {
        Ok(crate::argmax(&self.action_values(context, state, n_actions, encoder)?))
    }
}
