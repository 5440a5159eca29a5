//! Executable theory checks, printed as a pass/fail table by `tabql verify`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;

use crate::engine::{
    refit_gate, switch_gate, Agent, EngineConfig, GateConfig, RefitConfig, RefitTrigger, ReturnWindow, SwitchMode,
    TabularTask,
};
use crate::env::{EnvId, EnvState, Environment, FeatureEncoder, FeatureSpec, MdpSpec};
use crate::qnet::{grad_check, QNetParams, TdSample};
use crate::regressor::{Regressor, RegressorKind};
use crate::replay::{Context, Transition};
use crate::rng::{self, Rng, Stream};
use crate::theory::{bellman_apply, error_decompose, value_iteration, ErrorLedger, QTable};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult { name, passed, detail, elapsed: start.elapsed() }
}

/// A random MDP with rewards in [0, 1] and random sparse transition rows.
pub fn random_mdp(rng: &mut Rng, n_states: usize, n_actions: usize, gamma: f64) -> MdpSpec {
    let mut transitions = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let support = rng.gen_range(1..=n_states);
        let picked = rand::seq::index::sample(rng, n_states, support).into_vec();
        let weights: Vec<f64> = picked.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut row: Vec<(usize, f64)> = picked.into_iter().zip(weights).map(|(s, w)| (s, w / total)).collect();
        row.sort_by_key(|&(s, _)| s);
        transitions.push(row);
    }
    let reward = (0..n_states * n_actions).map(|_| rng.gen_range(0.0..1.0)).collect();
    MdpSpec::new(n_states, n_actions, transitions, reward, vec![false; n_states], gamma).expect("rows are normalized")
}

pub fn random_q(rng: &mut Rng, n_states: usize, n_actions: usize, scale: f64) -> QTable {
    QTable::from_values(n_states, n_actions, (0..n_states * n_actions).map(|_| rng.gen_range(-scale..scale)).collect())
}

/// ||TQ1 - TQ2|| <= gamma ||Q1 - Q2|| on 200 pairs over 20 MDPs, and the
/// value-iteration fixed point has residual within tolerance.
pub fn operator_suite(seed: u64) -> CheckResult {
    timed("operator contraction and fixed point", || {
        let mut rng = rng::stream(seed, Stream::Init);
        let tol = 1e-10;
        let (mut worst_slack, mut worst_residual) = (f64::NEG_INFINITY, 0.0f64);
        for _ in 0..20 {
            let (ns, na) = (rng.gen_range(2..=8), rng.gen_range(1..=4));
            let gamma = rng.gen_range(0.0..0.99);
            let mdp = random_mdp(&mut rng, ns, na, gamma);
            for _ in 0..10 {
                let q1 = random_q(&mut rng, ns, na, 10.0);
                let q2 = random_q(&mut rng, ns, na, 10.0);
                let lhs = bellman_apply(&q1, &mdp, gamma)?.sup_dist(&bellman_apply(&q2, &mdp, gamma)?);
                worst_slack = worst_slack.max(lhs - gamma * q1.sup_dist(&q2));
            }
            let star = value_iteration(&mdp, gamma, tol)?;
            worst_residual = worst_residual.max(bellman_apply(&star, &mdp, gamma)?.sup_dist(&star));
        }
        Ok((
            worst_slack <= 1e-12 && worst_residual <= tol,
            format!("max contraction slack {worst_slack:.3e}, max residual {worst_residual:.3e}"),
        ))
    })
}

fn random_context(rng: &mut Rng, mdp: &MdpSpec, encoder: FeatureEncoder, n: usize) -> Context {
    let mut source = Vec::with_capacity(n);
    for t in 0..n {
        let s = rng.gen_range(0..mdp.n_states);
        let a = rng.gen_range(0..mdp.n_actions);
        let u: f64 = rng.gen();
        let row = &mdp.transitions[mdp.sa(s, a)];
        let mut acc = 0.0;
        let next = row.iter().find(|&&(_, p)| {
            acc += p;
            u < acc
        });
        let next = next.unwrap_or(row.last().expect("nonempty row")).0;
        source.push(Transition {
            state: EnvState::discrete(EnvId::Tabular, s, 0, s),
            action: a,
            reward: mdp.reward[mdp.sa(s, a)],
            next_state: EnvState::discrete(EnvId::Tabular, next, 1, s),
            terminated: false,
            q_labels: (0..mdp.n_actions).map(|_| rng.gen_range(0.0..5.0)).collect(),
            timestep: t as u64,
            episode_id: t as u64,
            episode_return: None,
        });
    }
    Context::from_transitions(source, n, encoder)
}

/// The three error terms sum to Q_next - Q* on 100 random triples.
pub fn decomposition_suite(seed: u64) -> CheckResult {
    timed("error decomposition identity", || {
        let mut rng = rng::stream(seed, Stream::Context);
        let mut worst = 0.0f64;
        let spec = FeatureSpec { include_timestep: false, include_initial_tag: false };
        for _ in 0..100 {
            let (ns, na) = (rng.gen_range(2..=6), rng.gen_range(1..=3));
            let gamma = rng.gen_range(0.0..0.9);
            let mdp = random_mdp(&mut rng, ns, na, gamma);
            let star = value_iteration(&mdp, gamma, 1e-13)?;
            let encoder = Environment::tabular(Arc::new(mdp.clone()), 0, 10, 0)?.encoder(spec);
            let n_ctx = rng.gen_range(1..=30);
            let ctx = random_context(&mut rng, &mdp, encoder, n_ctx);
            let q_t = random_q(&mut rng, ns, na, 5.0);
            let q_next = random_q(&mut rng, ns, na, 5.0);
            let mut reg = Regressor::from_kind(&RegressorKind::Knn { k: rng.gen_range(1..=8) })?;
            let d = error_decompose(&q_t, &q_next, &star, &ctx, &mut reg, &mdp, EnvId::Tabular, gamma, 2)?;
            let sum = d.contraction.add(&d.stat).add(&d.icl);
            worst = worst.max(sum.sup_dist(&q_next.sub(&star)));
        }
        Ok((worst <= 1e-12, format!("max identity error {worst:.3e}")))
    })
}

/// Two states, two actions: action 0 stays, action 1 moves to the other
/// state, each succeeding with probability 0.9. Staying in state 1 pays 1.
pub fn two_state_mdp(gamma: f64) -> MdpSpec {
    let t = |s: usize, a: usize| {
        let intended = if a == 0 { s } else { 1 - s };
        vec![(0, if intended == 0 { 0.9 } else { 0.1 }), (1, if intended == 1 { 0.9 } else { 0.1 })]
    };
    let transitions = (0..2).flat_map(|s| (0..2).map(move |a| t(s, a))).collect();
    MdpSpec::new(2, 2, transitions, vec![0.0, 0.2, 1.0, 0.0], vec![false, false], gamma).expect("valid model")
}

/// A short TabQL run on [`two_state_mdp`] with the error ledger enabled.
pub fn two_state_trace(seed: u64) -> Result<ErrorLedger> {
    let gamma = 0.9;
    let mut cfg = EngineConfig::defaults(EnvId::Tabular);
    cfg.tabular = Some(TabularTask { mdp: Arc::new(two_state_mdp(gamma)), start: 0, horizon: 25 });
    cfg.gamma = gamma;
    cfg.seed = seed;
    cfg.total_steps = 4_000;
    cfg.gate.t0 = 1_500;
    cfg.context_k = 200;
    cfg.hidden = vec![16];
    cfg.sgd.batch_size = 16;
    cfg.sgd.target_sync = 100;
    cfg.sgd.epsilon.decay_steps = 1_000;
    cfg.sgd.epsilon.end = 0.1;
    cfg.switch = SwitchMode::Fixed;
    cfg.refit = RefitTrigger::EveryEpisodes(1);
    cfg.features = FeatureSpec { include_timestep: false, include_initial_tag: false };
    cfg.ledger = true;
    cfg.ledger_m_min = 1;
    let out = Agent::new(cfg)?.run()?;
    out.ledger.ok_or_else(|| Error::Config("ledger: run never switched".into()))
}

pub fn theorem1_suite(seed: u64) -> CheckResult {
    timed("theorem 1 bound on a two-state trace", || {
        let ledger = two_state_trace(seed)?;
        let rate = ledger.bound_hold_rate();
        Ok((
            rate == 1.0 && ledger.rows.len() > 1,
            format!("{} rows, bound held at {:.1}%", ledger.rows.len(), rate * 100.0),
        ))
    })
}

fn random_batch(rng: &mut Rng, n_in: usize, n_out: usize, size: usize) -> Vec<TdSample> {
    (0..size)
        .map(|_| TdSample {
            input: (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: rng.gen_range(0..n_out),
            reward: rng.gen_range(-1.0..1.0),
            next_input: (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            terminal: rng.gen_bool(0.2),
        })
        .collect()
}

/// Analytic TD gradients against central differences on 20 random nets,
/// and a sign-flipped gradient as the negative control.
pub fn gradient_suite(seed: u64) -> CheckResult {
    timed("td gradient check", || {
        let mut rng = rng::stream(seed, Stream::Replay);
        let (mut worst, mut control) = (0.0f64, f64::INFINITY);
        for _ in 0..20 {
            let n_in = rng.gen_range(1..=6);
            let n_out = rng.gen_range(1..=4);
            let hidden: Vec<usize> = (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(2..=8)).collect();
            let params = QNetParams::init(n_in, &hidden, n_out, &mut rng);
            let target = QNetParams::init(n_in, &hidden, n_out, &mut rng);
            let size = rng.gen_range(1..=8);
            let batch = random_batch(&mut rng, n_in, n_out, size);
            let gamma = rng.gen_range(0.0..0.99);
            worst = worst.max(grad_check(&params, &target, &batch, gamma, 40, false, &mut rng)?);
            control = control.min(grad_check(&params, &target, &batch, gamma, 40, true, &mut rng)?);
        }
        Ok((worst < 1e-4 && control > 1e-2, format!("max relative error {worst:.3e}, corrupted minimum {control:.3e}")))
    })
}

/// Boundary cases of both gates and their default constants.
pub fn gate_suite() -> CheckResult {
    timed("switch and refit gates", || {
        let mixed: ReturnWindow = std::iter::repeat_n(10.0, 20).chain(std::iter::repeat_n(0.0, 10)).collect();
        let short: ReturnWindow = std::iter::repeat_n(100.0, 29).collect();
        let base = GateConfig::new(0, 0.5, 0.0);
        let refit = RefitConfig::default();
        let checks = [
            ("W=30, G_min=20, delta=1", base.window == 30 && base.g_min == 20 && base.delta == 1.0),
            ("rho_stale=0.25, e_min=1", refit.rho_stale == 0.25 && refit.e_min == 1),
            ("mixed window fires", switch_gate(&mixed, &base).fire),
            ("mixed window counts 20", switch_gate(&mixed, &base).g_t == 20),
            ("floor 10 blocks", !switch_gate(&mixed, &GateConfig { theta_floor: 10.0, ..base }).fire),
            ("29 returns never fire", !switch_gate(&short, &base).fire),
            ("refit at 250 of 1000", refit_gate(1_250, 1_000, 1, 0, 1_000, &refit)),
            ("no refit at 249", !refit_gate(1_249, 1_000, 1, 0, 1_000, &refit)),
            ("no refit without an episode", !refit_gate(9_000, 1_000, 3, 3, 1_000, &refit)),
            ("failure floor -200 accepted", GateConfig::new(80_000, 0.75, -200.0).validate().is_ok()),
        ];
        let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
        Ok((
            failed.is_empty(),
            if failed.is_empty() {
                format!("{} cases", checks.len())
            } else {
                format!("failed: {}", failed.join("; "))
            },
        ))
    })
}

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![operator_suite(seed), decomposition_suite(seed), theorem1_suite(seed), gradient_suite(seed), gate_suite()]
}

pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{}  {:width$}  {:>8.2}s  {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail,
        ));
    }
    out
}
