//! Cross-seed generalization: agents trained from distinct initial
//! conditions pool their experience into one shared context, and the
//! in-context policy is evaluated from held-out initial conditions.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::env::{EnvId, EnvOptions, EnvState, Environment, FeatureSpec, InitialCondition};
use crate::qnet::{epsilon_greedy, EpsilonSchedule};
use crate::regressor::{Regressor, RegressorKind};
use crate::replay::{Context, Transition};
use crate::rng::{self, derive_seed, Stream};
use crate::theory::{tabular_q_update, QTable};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationConfig {
    pub env: EnvId,
    pub gamma: f64,
    pub seed: u64,
    pub repetitions: usize,
    /// Size of the pool of training conditions.
    pub n_train: usize,
    /// Context-condition counts to compare; each must be at most `n_train`.
    pub context_counts: Vec<usize>,
    pub n_test: usize,
    /// Q-learning steps per training condition.
    pub train_steps: u64,
    pub alpha: f64,
    pub epsilon: EpsilonSchedule,
    /// Labeled episodes each trained agent contributes to the context.
    pub rollout_episodes: usize,
    pub rollout_epsilon: f64,
    pub regressor: RegressorKind,
    pub features: FeatureSpec,
}

impl GeneralizationConfig {
    pub fn taxi() -> Self {
        Self {
            env: EnvId::Taxi,
            gamma: 0.99,
            seed: 0,
            repetitions: 5,
            n_train: 40,
            context_counts: vec![5, 40],
            n_test: 20,
            train_steps: 20_000,
            alpha: 0.5,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, decay_steps: 10_000 },
            rollout_episodes: 5,
            rollout_epsilon: 0.1,
            regressor: RegressorKind::Knn { k: 8 },
            features: FeatureSpec { include_timestep: false, include_initial_tag: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationRow {
    pub repetition: usize,
    pub n_context: usize,
    /// Mean raw return over held-out conditions.
    pub test_return: f64,
    pub test_normalized: f64,
    /// Mean normalized return from conditions that are in the context.
    pub seen_normalized: f64,
}

/// Trains a tabular agent that always starts from `start` and returns its
/// labeled rollouts.
fn condition_experience(cfg: &GeneralizationConfig, start: usize, seed: u64) -> Result<Vec<Transition>> {
    let mut env = Environment::new(cfg.env, EnvOptions::default(), seed)?;
    let n_states = env.n_states().expect("discrete env");
    let n_actions = env.n_actions();
    let mut q = QTable::zeros(n_states, n_actions);
    let mut explore = rng::stream(seed, Stream::Explore);
    let init = Some(InitialCondition::Index(start));
    let mut state = env.reset(init)?;
    for t in 0..cfg.train_steps {
        let s = state.index();
        let a = epsilon_greedy(q.row(s), cfg.epsilon.at(t), &mut explore);
        let step = env.step(&state, a)?;
        let next = (!step.terminated).then(|| step.next.index());
        tabular_q_update(&mut q, s, a, step.reward, next, cfg.alpha, cfg.gamma)?;
        state = if step.done() { env.reset(init)? } else { step.next };
    }
    let mut out = Vec::new();
    let mut t = 0;
    for episode in 0..cfg.rollout_episodes as u64 {
        let mut state = env.reset(init)?;
        loop {
            let a = epsilon_greedy(q.row(state.index()), cfg.rollout_epsilon, &mut explore);
            let step = env.step(&state, a)?;
            out.push(Transition {
                q_labels: q.row(state.index()).to_vec(),
                state: state.clone(),
                action: a,
                reward: step.reward,
                next_state: step.next.clone(),
                terminated: step.terminated,
                timestep: t,
                episode_id: episode,
                episode_return: None,
            });
            t += 1;
            if step.done() {
                break;
            }
            state = step.next;
        }
    }
    Ok(out)
}

fn greedy_return(env: &mut Environment, start: usize, ctx: &Context, regressor: &mut Regressor) -> Result<f64> {
    let mut state: EnvState = env.reset(Some(InitialCondition::Index(start)))?;
    let mut ret = 0.0;
    loop {
        let a = regressor.greedy_action(&ctx.rows, &state, env.n_actions(), ctx.encoder())?;
        let step = env.step(&state, a)?;
        ret += step.reward;
        if step.done() {
            return Ok(ret);
        }
        state = step.next;
    }
}

/// One row per repetition and context count. Within a repetition the
/// contexts are nested: the first n conditions of one training pool.
pub fn cross_seed_generalization(cfg: &GeneralizationConfig) -> Result<Vec<GeneralizationRow>> {
    let probe = Environment::new(cfg.env, EnvOptions::default(), cfg.seed)?;
    let pool = probe.initial_conditions();
    if cfg.context_counts.is_empty() || cfg.context_counts.contains(&0) {
        return Err(Error::Config("context conditions: counts must be at least 1".into()));
    }
    if cfg.context_counts.iter().any(|&n| n > cfg.n_train) {
        return Err(Error::Config("context conditions: more than the training pool".into()));
    }
    if cfg.n_test == 0 || cfg.repetitions == 0 {
        return Err(Error::Config("test conditions and repetitions must be at least 1".into()));
    }
    if cfg.n_train + cfg.n_test > pool.len() {
        return Err(Error::Config(format!(
            "conditions: {} training + {} test exceed the {} distinct initial states",
            cfg.n_train,
            cfg.n_test,
            pool.len()
        )));
    }
    cfg.regressor.validate()?;
    let reps: Vec<Result<Vec<GeneralizationRow>>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(cfg.seed, rep as u64);
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rng::stream(rep_seed, Stream::Conditions));
            let (test, rest) = shuffled.split_at(cfg.n_test);
            let train = &rest[..cfg.n_train];
            let experience: Vec<Vec<Transition>> = train
                .iter()
                .enumerate()
                .map(|(i, &c)| condition_experience(cfg, c, derive_seed(rep_seed, 1 + i as u64)))
                .collect::<Result<_>>()?;
            let mut env = Environment::new(cfg.env, EnvOptions::default(), rep_seed)?;
            let encoder = env.encoder(cfg.features);
            let mut regressor = Regressor::from_kind(&cfg.regressor)?;
            let mut rows = Vec::new();
            for &n in &cfg.context_counts {
                let source: Vec<Transition> = experience[..n].iter().flatten().cloned().collect();
                let k = source.len();
                let ctx = Context::from_transitions(source, k, encoder);
                let mut test_sum = (0.0, 0.0);
                for &c in test {
                    let r = greedy_return(&mut env, c, &ctx, &mut regressor)?;
                    test_sum.0 += r;
                    test_sum.1 += env.normalize_return(r);
                }
                let seen: Vec<usize> = train[..n].iter().copied().take(cfg.n_test).collect();
                let mut seen_sum = 0.0;
                for &c in &seen {
                    let r = greedy_return(&mut env, c, &ctx, &mut regressor)?;
                    seen_sum += env.normalize_return(r);
                }
                rows.push(GeneralizationRow {
                    repetition: rep,
                    n_context: n,
                    test_return: test_sum.0 / test.len() as f64,
                    test_normalized: test_sum.1 / test.len() as f64,
                    seen_normalized: seen_sum / seen.len() as f64,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for r in reps {
        out.extend(r?);
    }
    Ok(out)
}

/// Mean held-out normalized return per context count, in config order.
pub fn summarize(cfg: &GeneralizationConfig, rows: &[GeneralizationRow]) -> Vec<(usize, f64)> {
    cfg.context_counts
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n_context == n).map(|r| r.test_normalized).collect();
            (n, v.iter().sum::<f64>() / v.len().max(1) as f64)
        })
        .collect()
}
