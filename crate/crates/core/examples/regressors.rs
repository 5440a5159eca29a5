//! The in-context regressors on a toy row set: each predicts query labels
//! from labeled support rows with no fitting step.

use tabql::env::FeatureRow;
use tabql::regressor::{Regressor, RegressorKind, RowSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // y = x0 - 2 x1 on a small grid
    let rows: Vec<FeatureRow> = (0..5)
        .flat_map(|i| (0..5).map(move |j| (i as f64, j as f64)))
        .map(|(a, b)| FeatureRow::labeled(vec![a, b], a - 2.0 * b))
        .collect();
    let support = RowSet::new(rows)?;
    let queries = vec![FeatureRow::query(vec![2.0, 2.0]), FeatureRow::query(vec![1.5, 0.5])];

    for kind in [RegressorKind::Knn { k: 1 }, RegressorKind::Knn { k: 4 }, RegressorKind::Kernel { bandwidth: 0.3 }] {
        let mut reg = Regressor::from_kind(&kind)?;
        println!("{kind:?}: {:?}", reg.predict(&support, &queries)?);
    }
    Ok(())
}
