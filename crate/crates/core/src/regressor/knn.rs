//! Inverse-distance-weighted k-nearest-neighbour regression on
//! standardized features.

use super::rows::RowSet;

/// Squared standardized distances from `query` to every row, canonical order.
pub(crate) fn distances(set: &RowSet, query: &[f64]) -> Vec<f64> {
    let p = set.prepared();
    let q = set.standardize(query);
    p.z.chunks_exact(set.n_feat().max(1)).map(|row| row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum()).collect()
}

pub(crate) fn predict_one(set: &RowSet, k: usize, query: &[f64]) -> f64 {
    let p = set.prepared();
    let d2 = distances(set, query);

    let mut zero_sum = 0.0;
    let mut zero_n = 0usize;
    for (i, &d) in d2.iter().enumerate() {
        if d == 0.0 {
            zero_sum += p.labels[i];
            zero_n += 1;
        }
    }
    if zero_n > 0 {
        return zero_sum / zero_n as f64;
    }

    let mut idx: Vec<usize> = (0..d2.len()).collect();
    let k = k.min(idx.len());
    let by_dist = |a: &usize, b: &usize| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, by_dist);
        idx.truncate(k);
    }
    idx.sort_unstable();

    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &idx {
        let w = 1.0 / d2[i].sqrt();
        num += w * p.labels[i];
        den += w;
    }
    (num / den).clamp(p.min_label, p.max_label)
}
