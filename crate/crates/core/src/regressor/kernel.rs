//! Gaussian-kernel (Nadaraya-Watson) regression on standardized features.

use super::knn::distances;
use super::rows::RowSet;

pub(crate) fn predict_one(set: &RowSet, bandwidth: f64, query: &[f64]) -> f64 {
    let p = set.prepared();
    let d2 = distances(set, query);
    // shift by the smallest distance so the nearest weight is exactly 1
    let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let h2 = 2.0 * bandwidth * bandwidth;
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, l) in d2.iter().zip(&p.labels) {
        let w = (-(d - min) / h2).exp();
        num += w * l;
        den += w;
    }
    (num / den).clamp(p.min_label, p.max_label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FeatureRow;

    #[test]
    fn hand_weighted_mean() {
        let s = RowSet::new(vec![FeatureRow::labeled(vec![-1.0], 0.0), FeatureRow::labeled(vec![1.0], 1.0)]).unwrap();
        // query at z=0.5: d2 = 2.25 and 0.25; weights exp(-2) and 1 after the shift
        let w0 = (-2.0f64 / 2.0).exp();
        let expected = 1.0 / (1.0 + w0);
        assert!((predict_one(&s, 1.0, &[0.5]) - expected).abs() < 1e-15);
    }

    #[test]
    fn far_queries_stay_finite() {
        let s = RowSet::new(vec![FeatureRow::labeled(vec![0.0], 3.0), FeatureRow::labeled(vec![1.0], 5.0)]).unwrap();
        let v = predict_one(&s, 0.01, &[1e6]);
        assert!(v.is_finite());
        assert_eq!(v, 5.0);
    }
}
