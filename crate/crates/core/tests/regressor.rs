use proptest::prelude::*;

use tabql::env::{EnvId, EnvOptions, EnvState, Environment, FeatureRow, FeatureSpec};
use tabql::regressor::{Regressor, RegressorKind, RowSet};
use tabql::theory::value_iteration;

fn rows_strategy() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    (1usize..4).prop_flat_map(|d| {
        proptest::collection::vec((proptest::collection::vec(-10.0f64..10.0, d), -50.0f64..50.0), 1..40)
    })
}

fn to_set(rows: &[(Vec<f64>, f64)]) -> RowSet {
    RowSet::new(rows.iter().map(|(f, l)| FeatureRow::labeled(f.clone(), *l)).collect()).unwrap()
}

fn kinds() -> Vec<RegressorKind> {
    vec![
        RegressorKind::Knn { k: 1 },
        RegressorKind::Knn { k: 5 },
        RegressorKind::Kernel { bandwidth: 0.3 },
        RegressorKind::Kernel { bandwidth: 2.0 },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predictions_stay_in_label_range(rows in rows_strategy(), q in proptest::collection::vec(-20.0f64..20.0, 3)) {
        let set = to_set(&rows);
        let d = rows[0].0.len();
        let query = [FeatureRow::query(q[..d].to_vec())];
        let lo = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        for kind in kinds() {
            let v = Regressor::from_kind(&kind).unwrap().predict(&set, &query).unwrap()[0];
            prop_assert!(v >= lo && v <= hi, "{kind} gave {v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn predictions_are_frozen_and_permutation_invariant(rows in rows_strategy(), shift in 0usize..40) {
        let set = to_set(&rows);
        let mut rotated = rows.clone();
        let n = rotated.len();
        rotated.rotate_left(shift % n);
        rotated.reverse();
        let other = to_set(&rotated);
        let queries: Vec<FeatureRow> = rows.iter().map(|(f, _)| FeatureRow::query(f.iter().map(|x| x + 0.37).collect())).collect();
        for kind in kinds() {
            let mut reg = Regressor::from_kind(&kind).unwrap();
            let first = reg.predict(&set, &queries).unwrap();
            let again = reg.predict(&set, &queries).unwrap();
            let permuted = reg.predict(&other, &queries).unwrap();
            prop_assert_eq!(first.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), again.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(first.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), permuted.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn constant_labels_reproduced(rows in rows_strategy(), c in -5.0f64..5.0) {
        let flat: Vec<(Vec<f64>, f64)> = rows.into_iter().map(|(f, _)| (f, c)).collect();
        let set = to_set(&flat);
        let queries: Vec<FeatureRow> = flat.iter().map(|(f, _)| FeatureRow::query(f.iter().map(|x| x * 1.5 - 1.0).collect())).collect();
        for kind in kinds() {
            for v in Regressor::from_kind(&kind).unwrap().predict(&set, &queries).unwrap() {
                prop_assert!((v - c).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn exact_table_with_q_star_is_optimal() {
    let mut env = Environment::new(EnvId::FrozenLake4, EnvOptions::default(), 0).unwrap();
    let star = value_iteration(&env.model(0.95).unwrap(), 0.95, 1e-12).unwrap();
    let enc = env.encoder(FeatureSpec::default());
    let mut reg = Regressor::exact_table(star.clone());
    let dummy = RowSet::new(vec![{
        let mut r = enc.encode(&env.reset(None).unwrap(), 0);
        r.label = Some(0.0);
        r
    }])
    .unwrap();
    for s in 0..16 {
        let state = EnvState::discrete(EnvId::FrozenLake4, s, 0, 0);
        assert_eq!(reg.greedy_action(&dummy, &state, 4, &enc).unwrap(), star.greedy(s));
    }
}

#[test]
fn dominant_action_cluster_wins() {
    let env = Environment::new(EnvId::CliffWalking, EnvOptions::default(), 0).unwrap();
    let enc = env.encoder(FeatureSpec { include_timestep: false, include_initial_tag: false });
    let mut rows = Vec::new();
    for s in 0..48 {
        let state = EnvState::discrete(EnvId::CliffWalking, s, 0, 0);
        for a in 0..4 {
            let mut r = enc.encode(&state, a);
            r.label = Some(if a == 2 { 10.0 } else { -(s as f64) });
            rows.push(r);
        }
    }
    let set = RowSet::new(rows).unwrap();
    let mut reg = Regressor::from_kind(&RegressorKind::Knn { k: 3 }).unwrap();
    for s in [0, 13, 30, 47] {
        let state = EnvState::discrete(EnvId::CliffWalking, s, 0, 0);
        assert_eq!(reg.greedy_action(&set, &state, 4, &enc).unwrap(), 2);
    }
}

#[test]
fn tied_predictions_pick_action_zero() {
    let env = Environment::new(EnvId::FrozenLake4, EnvOptions::default(), 0).unwrap();
    let enc = env.encoder(FeatureSpec::default());
    let state = EnvState::discrete(EnvId::FrozenLake4, 5, 0, 0);
    let set = RowSet::new(vec![FeatureRow::labeled(enc.encode(&state, 1).features, 4.0)]).unwrap();
    let mut reg = Regressor::from_kind(&RegressorKind::Knn { k: 1 }).unwrap();
    assert_eq!(reg.greedy_action(&set, &state, 4, &enc).unwrap(), 0);
}
