//! Baselines: tabular Q-learning, fitted Q-iteration, and rollout helpers.
//! The DQN baseline is the engine with switching disabled.

use std::collections::HashMap;

use crate::engine::{EngineConfig, EpisodeRecord, Phase, RunOutput};
use crate::env::{EnvState, Environment, FeatureEncoder, FeatureRow};
use crate::qnet::epsilon_greedy;
use crate::regressor::{Regressor, RowSet};
use crate::replay::{ReplayError, Transition};
use crate::rng::{self, Stream};
use crate::theory::{tabular_q_update, QTable};
use crate::{argmax, Error, Result};

/// Tabular Q-learning with a constant step size and the config's epsilon
/// schedule. Rewards are raw.
pub fn tabular_q(cfg: &EngineConfig, alpha: f64) -> Result<(RunOutput, QTable)> {
    cfg.validate()?;
    let mut env = cfg.make_env(cfg.seed)?;
    let n_states = env.n_states().ok_or_else(|| Error::Config("algo: tabular_q needs a discrete env".into()))?;
    let mut q = QTable::zeros(n_states, env.n_actions());
    let mut explore = rng::stream(cfg.seed, Stream::Explore);
    let mut curve = Vec::new();
    let mut state = env.reset(None)?;
    let (mut episode, mut ret) = (0u64, 0.0);
    for t in 0..cfg.total_steps {
        let s = state.index();
        let a = epsilon_greedy(q.row(s), cfg.sgd.epsilon.at(t), &mut explore);
        let step = env.step(&state, a)?;
        let next = (!step.terminated).then(|| step.next.index());
        tabular_q_update(&mut q, s, a, step.reward, next, alpha, cfg.gamma)?;
        ret += step.reward;
        state = step.next.clone();
        if step.done() {
            curve.push(EpisodeRecord { seed: cfg.seed, episode, end_step: t + 1, ret, phase: Phase::Train });
            episode += 1;
            ret = 0.0;
            state = env.reset(None)?;
        }
    }
    Ok((RunOutput { curve, ledger: None, switch_step: None }, q))
}

/// Transitions from a uniformly random behavior policy.
pub fn random_dataset(env: &mut Environment, steps: u64, seed: u64) -> Result<Vec<Transition>> {
    let mut explore = rng::stream(seed, Stream::Explore);
    let mut data = Vec::with_capacity(steps as usize);
    let mut state = env.reset(None)?;
    let mut episode = 0;
    for t in 0..steps {
        let a = epsilon_greedy(&vec![0.0; env.n_actions()], 1.0, &mut explore);
        let step = env.step(&state, a)?;
        data.push(Transition {
            state: state.clone(),
            action: a,
            reward: step.reward,
            next_state: step.next.clone(),
            terminated: step.terminated,
            q_labels: Vec::new(),
            timestep: t,
            episode_id: episode,
            episode_return: None,
        });
        state = if step.done() {
            episode += 1;
            env.reset(None)?
        } else {
            step.next
        };
    }
    Ok(data)
}

/// A fitted Q-function: the last regression context, or Q = 0 when no
/// iteration ran.
#[derive(Debug, Clone)]
pub struct FqiPolicy {
    context: Option<RowSet>,
    encoder: FeatureEncoder,
    n_actions: usize,
}

impl FqiPolicy {
    pub fn context(&self) -> Option<&RowSet> {
        self.context.as_ref()
    }

    pub fn action_values(&self, regressor: &mut Regressor, state: &EnvState) -> Result<Vec<f64>> {
        match &self.context {
            None => Ok(vec![0.0; self.n_actions]),
            Some(rows) => Ok(regressor.action_values(rows, state, self.n_actions, &self.encoder)?),
        }
    }

    pub fn greedy(&self, regressor: &mut Regressor, state: &EnvState) -> Result<usize> {
        Ok(argmax(&self.action_values(regressor, state)?))
    }
}

fn bits(row: &FeatureRow) -> (Vec<u64>, Option<(usize, usize)>) {
    (row.features.iter().map(|v| v.to_bits()).collect(), row.key)
}

/// Fitted Q-iteration: Q_{k+1} = fit of r + gamma max_a' Q_k(s', a') over
/// the dataset, with `regressor` as the fitter and Q_0 = 0.
pub fn fqi(
    dataset: &[Transition],
    encoder: FeatureEncoder,
    n_actions: usize,
    regressor: &mut Regressor,
    gamma: f64,
    iterations: usize,
) -> Result<FqiPolicy> {
    if dataset.is_empty() {
        return Err(ReplayError::EmptyBuffer.into());
    }
    let inputs: Vec<FeatureRow> = dataset.iter().map(|t| encoder.encode(&t.state, t.action)).collect();
    // distinct next-state queries, so each iteration predicts each once
    let mut index: HashMap<_, usize> = HashMap::new();
    let mut queries = Vec::new();
    let mut slots = Vec::with_capacity(dataset.len());
    for t in dataset {
        if t.terminated {
            slots.push(None);
            continue;
        }
        let first = encoder.encode(&t.next_state, 0);
        let slot = *index.entry(bits(&first)).or_insert_with(|| {
            queries.extend((0..n_actions).map(|a| encoder.encode(&t.next_state, a)));
            queries.len() / n_actions - 1
        });
        slots.push(Some(slot));
    }
    let mut context: Option<RowSet> = None;
    for _ in 0..iterations {
        let next_max: Vec<f64> = match (&context, queries.is_empty() || gamma == 0.0) {
            (Some(rows), false) => regressor
                .predict(rows, &queries)?
                .chunks(n_actions)
                .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
            _ => vec![0.0; queries.len() / n_actions],
        };
        let rows = dataset
            .iter()
            .zip(&inputs)
            .zip(&slots)
            .map(|((t, x), slot)| {
                let bootstrap = slot.map_or(0.0, |i| next_max[i]);
                FeatureRow { label: Some(t.reward + gamma * bootstrap), ..x.clone() }
            })
            .collect();
        context = Some(RowSet::new(rows)?);
    }
    Ok(FqiPolicy { context, encoder, n_actions })
}

/// Runs `episodes` greedy episodes and returns their records.
pub fn evaluate(
    env: &mut Environment,
    episodes: usize,
    seed: u64,
    mut policy: impl FnMut(&EnvState) -> Result<usize>,
) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::with_capacity(episodes);
    let mut t = 0;
    for episode in 0..episodes as u64 {
        let mut state = env.reset(None)?;
        let mut ret = 0.0;
        loop {
            let step = env.step(&state, policy(&state)?)?;
            ret += step.reward;
            t += 1;
            if step.done() {
                break;
            }
            state = step.next;
        }
        out.push(EpisodeRecord { seed, episode, end_step: t, ret, phase: Phase::Eval });
    }
    Ok(out)
}
