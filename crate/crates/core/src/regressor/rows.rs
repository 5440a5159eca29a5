use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::OnceLock;

use crate::env::FeatureRow;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Labeled rows handed to a regressor, plus a lazily built standardized
/// view shared by every prediction against the same rows.
#[derive(Debug, Clone)]
pub struct RowSet {
    id: u64,
    rows: Vec<FeatureRow>,
    n_feat: usize,
    prepared: OnceLock<Prepared>,
}

#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Standardized features in canonical order, row-major.
    pub z: Vec<f64>,
    pub labels: Vec<f64>,
    pub min_label: f64,
    pub max_label: f64,
}

impl RowSet {
    /// Rows must all carry labels and share one feature length.
    pub fn new(rows: Vec<FeatureRow>) -> Result<Self, super::RegressorError> {
        let n_feat = rows.first().map_or(0, |r| r.features.len());
        for r in &rows {
            if r.features.len() != n_feat {
                return Err(super::RegressorError::DimensionMismatch(format!(
                    "row has {} features, expected {n_feat}",
                    r.features.len()
                )));
            }
            match r.label {
                Some(l) if l.is_finite() => {}
                _ => return Err(super::RegressorError::MissingLabel),
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(super::RegressorError::NonFinite);
            }
        }
        Ok(Self { id: NEXT_ID.fetch_add(1, AtomicOrdering::Relaxed), rows, n_feat, prepared: OnceLock::new() })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_feat(&self) -> usize {
        self.n_feat
    }

    pub(crate) fn prepared(&self) -> &Prepared {
        self.prepared.get_or_init(|| prepare(&self.rows, self.n_feat))
    }

    /// Standardizes `features` with this set's statistics.
    pub(crate) fn standardize(&self, features: &[f64]) -> Vec<f64> {
        let p = self.prepared();
        features.iter().zip(&p.mean).zip(&p.scale).map(|((x, m), s)| (x - m) / s).collect()
    }
}

fn canonical_cmp(a: &FeatureRow, b: &FeatureRow) -> Ordering {
    for (x, y) in a.features.iter().zip(&b.features) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.label.unwrap().total_cmp(&b.label.unwrap())
}

fn prepare(rows: &[FeatureRow], n_feat: usize) -> Prepared {
    // every sum runs in canonical order, so row permutations are bit-exact
    let mut order: Vec<&FeatureRow> = rows.iter().collect();
    order.sort_by(|a, b| canonical_cmp(a, b));
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; n_feat];
    for r in &order {
        for (m, x) in mean.iter_mut().zip(&r.features) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; n_feat];
    for r in &order {
        for ((v, x), m) in var.iter_mut().zip(&r.features).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = (v / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let mut z = Vec::with_capacity(rows.len() * n_feat);
    let mut labels = Vec::with_capacity(rows.len());
    for r in order {
        z.extend(r.features.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s));
        labels.push(r.label.unwrap());
    }
    let min_label = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let max_label = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Prepared { mean, scale, z, labels, min_label, max_label }
}
