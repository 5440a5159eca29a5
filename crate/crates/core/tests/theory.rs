use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;

use tabql::env::{EnvId, EnvState, Environment, FeatureSpec, MdpSpec};
use tabql::regressor::{Regressor, RegressorKind};
use tabql::replay::{Context, Transition};
use tabql::rng::Rng;
use tabql::theory::{
    bellman_apply, empirical_bellman_apply, error_decompose, tabular_q_update, theorem1_rhs, value_iteration, QTable,
};
use tabql::verify::{random_mdp, random_q};

fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn brute_force_bellman(q: &QTable, mdp: &MdpSpec, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; mdp.n_states * mdp.n_actions];
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut next = 0.0;
            for &(s2, p) in &mdp.transitions[s * mdp.n_actions + a] {
                let mut best = f64::NEG_INFINITY;
                for a2 in 0..mdp.n_actions {
                    best = best.max(q.get(s2, a2));
                }
                next += p * best;
            }
            out[s * mdp.n_actions + a] = mdp.reward[s * mdp.n_actions + a] + gamma * next;
        }
    }
    out
}

#[test]
fn bellman_matches_double_loop() {
    let mut r = rng(3);
    for _ in 0..20 {
        let mdp = random_mdp(&mut r, 5, 3, 0.9);
        let q = random_q(&mut r, 5, 3, 4.0);
        let fast = bellman_apply(&q, &mdp, 0.9).unwrap();
        for (x, y) in fast.values().iter().zip(brute_force_bellman(&q, &mdp, 0.9)) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn one_state_geometric_series() {
    let mdp = MdpSpec::new(1, 1, vec![vec![(0, 1.0)]], vec![1.0], vec![false], 0.5).unwrap();
    let tq = bellman_apply(&QTable::zeros(1, 1), &mdp, 0.5).unwrap();
    assert_eq!(tq.get(0, 0), 1.0);
    let star = value_iteration(&mdp, 0.5, 1e-12).unwrap();
    assert!((star.get(0, 0) - 2.0).abs() < 1e-11);
}

fn transition(s: usize, a: usize, r: f64, next: usize, labels: Vec<f64>, t: u64) -> Transition {
    Transition {
        state: EnvState::discrete(EnvId::Tabular, s, 0, s),
        action: a,
        reward: r,
        next_state: EnvState::discrete(EnvId::Tabular, next, 1, s),
        terminated: false,
        q_labels: labels,
        timestep: t,
        episode_id: t,
        episode_return: None,
    }
}

fn bare() -> FeatureSpec {
    FeatureSpec { include_timestep: false, include_initial_tag: false }
}

fn context_for(mdp: &MdpSpec, source: Vec<Transition>) -> Context {
    let env = Environment::tabular(Arc::new(mdp.clone()), 0, 50, 0).unwrap();
    let k = source.len();
    Context::from_transitions(source, k, env.encoder(bare()))
}

/// Deterministic 3-state chain: action 0 stays, action 1 advances (mod 3).
fn chain(gamma: f64) -> MdpSpec {
    let mut transitions = Vec::new();
    for s in 0..3 {
        transitions.push(vec![(s, 1.0)]);
        transitions.push(vec![((s + 1) % 3, 1.0)]);
    }
    MdpSpec::new(3, 2, transitions, vec![0.1, 0.0, 0.0, 0.5, 1.0, 0.2], vec![false; 3], gamma).unwrap()
}

#[test]
fn empirical_operator_fixes_q_star_under_full_coverage() {
    let gamma = 0.9;
    let mdp = chain(gamma);
    let star = value_iteration(&mdp, gamma, 1e-13).unwrap();
    let mut source = Vec::new();
    for s in 0..3 {
        for a in 0..2 {
            let next = mdp.transitions[mdp.sa(s, a)][0].0;
            source.push(transition(s, a, mdp.reward[mdp.sa(s, a)], next, star.row(s).to_vec(), source.len() as u64));
        }
    }
    let ctx = context_for(&mdp, source);
    let mut reg = Regressor::exact_table(star.clone());
    let out = empirical_bellman_apply(&star, &ctx, &mut reg, &mdp, EnvId::Tabular, gamma, 1).unwrap();
    assert!(out.table.sup_dist(&star) < 1e-11);
    let d = error_decompose(&star, &star, &star, &ctx, &mut reg, &mdp, EnvId::Tabular, gamma, 1).unwrap();
    for term in [&d.contraction, &d.stat, &d.icl] {
        assert!(term.sup_norm() < 1e-11);
    }
}

#[test]
fn empirical_operator_with_zero_discount_is_the_reward() {
    let mdp = chain(0.0);
    let ctx = context_for(&mdp, vec![transition(0, 1, 0.0, 1, vec![3.0, -3.0], 0)]);
    let mut reg = Regressor::from_kind(&RegressorKind::Knn { k: 1 }).unwrap();
    let q = QTable::from_values(3, 2, vec![9.0; 6]);
    let out = empirical_bellman_apply(&q, &ctx, &mut reg, &mdp, EnvId::Tabular, 0.0, 1).unwrap();
    assert_eq!(out.table.values(), mdp.reward.as_slice());
}

/// Two states, context rows (0,0)->0, (0,0)->1, (1,1)->0 with exact-table
/// labels. Each term of the empirical operator expanded by hand.
#[test]
fn empirical_operator_hand_expansion() {
    let gamma = 0.8;
    let transitions = vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)], vec![(0, 1.0)], vec![(0, 1.0)]];
    let mdp = MdpSpec::new(2, 2, transitions, vec![0.2, 0.4, 0.6, 0.9], vec![false; 2], gamma).unwrap();
    let labels_0 = vec![1.0, 2.0];
    let labels_1 = vec![5.0, 3.0];
    let ctx = context_for(
        &mdp,
        vec![
            transition(0, 0, 0.2, 0, labels_0.clone(), 0),
            transition(0, 0, 0.2, 1, labels_0.clone(), 1),
            transition(1, 1, 0.9, 0, labels_1.clone(), 2),
        ],
    );
    // Q picks action 1 in state 0 and action 0 in state 1.
    let q = QTable::from_values(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
    let mut reg = Regressor::from_kind(&RegressorKind::ExactTable).unwrap();
    let out = empirical_bellman_apply(&q, &ctx, &mut reg, &mdp, EnvId::Tabular, gamma, 1).unwrap();
    let f0 = labels_0[1];
    let f1 = labels_1[0];
    // (0,0): half to each state.
    let expect_00 = 0.5 * (0.2 + gamma * f0) + 0.5 * (0.2 + gamma * f1);
    // (1,1): only to state 0.
    let expect_11 = 0.9 + gamma * f0;
    assert!((out.table.get(0, 0) - expect_00).abs() < 1e-12);
    assert!((out.table.get(1, 1) - expect_11).abs() < 1e-12);
    assert_eq!(out.m_min, 1);
}

fn mdp_strategy() -> impl Strategy<Value = (u64, usize, usize, f64)> {
    (any::<u64>(), 1usize..7, 1usize..4, 0.0f64..0.98)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_is_a_gamma_contraction((seed, ns, na, gamma) in mdp_strategy()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let q1 = random_q(&mut r, ns, na, 20.0);
        let q2 = random_q(&mut r, ns, na, 20.0);
        let lhs = bellman_apply(&q1, &mdp, gamma).unwrap().sup_dist(&bellman_apply(&q2, &mdp, gamma).unwrap());
        prop_assert!(lhs <= gamma * q1.sup_dist(&q2) + 1e-12);
    }

    #[test]
    fn value_iteration_residual_within_tolerance((seed, ns, na, gamma) in mdp_strategy(), tol_exp in 4i32..12) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let tol = 10f64.powi(-tol_exp);
        let q = value_iteration(&mdp, gamma, tol).unwrap();
        prop_assert!(bellman_apply(&q, &mdp, gamma).unwrap().sup_dist(&q) <= tol);
    }

    #[test]
    fn decomposition_sums_to_total_error((seed, ns, na, gamma) in mdp_strategy(), k in 1usize..6, n_ctx in 1usize..25) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let star = value_iteration(&mdp, gamma, 1e-12).unwrap();
        let q_t = random_q(&mut r, ns, na, 5.0);
        let q_next = random_q(&mut r, ns, na, 5.0);
        let labels = random_q(&mut r, ns, na, 5.0);
        let source = (0..n_ctx)
            .map(|i| {
                let (s, a) = (i * 7 % ns, i * 3 % na);
                let next = mdp.transitions[mdp.sa(s, a)][0].0;
                transition(s, a, mdp.reward[mdp.sa(s, a)], next, labels.row(s).to_vec(), i as u64)
            })
            .collect();
        let ctx = context_for(&mdp, source);
        let mut reg = Regressor::from_kind(&RegressorKind::Knn { k }).unwrap();
        let d = error_decompose(&q_t, &q_next, &star, &ctx, &mut reg, &mdp, EnvId::Tabular, gamma, 2).unwrap();
        let sum = d.contraction.add(&d.stat).add(&d.icl);
        prop_assert!(sum.sup_dist(&q_next.sub(&star)) <= 1e-12);
    }

    #[test]
    fn q_update_touches_one_entry(seed in any::<u64>(), s in 0usize..4, a in 0usize..3, alpha in 0.0f64..=1.0, r in -5.0f64..5.0) {
        let mut g = rng(seed);
        let before = random_q(&mut g, 4, 3, 3.0);
        let mut after = before.clone();
        tabular_q_update(&mut after, s, a, r, Some((s + 1) % 4), alpha, 0.9).unwrap();
        for s2 in 0..4 {
            for a2 in 0..3 {
                if (s2, a2) != (s, a) {
                    prop_assert_eq!(after.get(s2, a2), before.get(s2, a2));
                }
            }
        }
        let target = r + 0.9 * before.max((s + 1) % 4);
        prop_assert!((after.get(s, a) - ((1.0 - alpha) * before.get(s, a) + alpha * target)).abs() < 1e-12);
    }

    #[test]
    fn theorem1_rhs_is_monotone_in_the_errors(gamma in 0.0f64..0.99, t in 1usize..30, e in 0.0f64..2.0, bump in 0.0f64..1.0) {
        let icl = vec![e; t];
        let stat = vec![e / 2.0; t];
        let base = theorem1_rhs(t, 1.0, &icl, &stat, gamma).unwrap();
        let more: Vec<f64> = icl.iter().map(|v| v + bump).collect();
        prop_assert!(theorem1_rhs(t, 1.0, &more, &stat, gamma).unwrap() >= base - 1e-12);
    }
}
