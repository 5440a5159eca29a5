//! Replay buffer of labeled transitions, context construction, the quality
//! filter, and the context's empirical next-state distribution.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index;
use thiserror::Error;

use crate::env::{EnvState, FeatureEncoder};
use crate::regressor::RowSet;
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("context is empty")]
    EmptyContext,
    #[error("context size must be at least 1")]
    ZeroContext,
    #[error("m_min must be at least 1")]
    ZeroMMin,
    #[error("next-state distribution needs discrete states")]
    NotDiscrete,
    #[error("unknown sampling strategy `{0}`")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: usize,
    /// Raw environment reward.
    pub reward: f64,
    pub next_state: EnvState,
    pub terminated: bool,
    /// Teacher Q-values of every action in `state` at collection time.
    pub q_labels: Vec<f64>,
    /// Global step at collection.
    pub timestep: u64,
    pub episode_id: u64,
    pub episode_return: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be positive");
        Self { entries: VecDeque::with_capacity(capacity.min(1 << 20)), capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends, evicting the oldest entry when full. Timesteps must increase.
    pub fn push(&mut self, t: Transition) {
        debug_assert!(self.entries.back().is_none_or(|b| b.timestep < t.timestep));
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.entries[i]
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Transition> + ExactSizeIterator {
        self.entries.iter()
    }

    /// Records the return of a finished episode on its stored transitions.
    pub fn set_episode_return(&mut self, episode_id: u64, ret: f64) {
        for t in self.entries.iter_mut().rev() {
            if t.episode_id != episode_id {
                break;
            }
            t.episode_return = Some(ret);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Recent,
    /// Distinct uniform draws; ablation only.
    Uniform,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Recent => "recent",
            Strategy::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = ReplayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recent" => Ok(Strategy::Recent),
            "uniform" => Ok(Strategy::Uniform),
            other => Err(ReplayError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Transitions selected for in-context inference and their expanded rows,
/// one per action, most recent transition first.
#[derive(Debug, Clone)]
pub struct Context {
    pub rows: RowSet,
    pub source: Vec<Transition>,
    pub size_k: usize,
    encoder: FeatureEncoder,
}

impl Context {
    pub fn from_transitions(source: Vec<Transition>, size_k: usize, encoder: FeatureEncoder) -> Self {
        let mut rows = Vec::new();
        for t in &source {
            for (a, &label) in t.q_labels.iter().enumerate() {
                let mut row = encoder.encode(&t.state, a);
                row.label = Some(label);
                rows.push(row);
            }
        }
        let rows = RowSet::new(rows).expect("labels and features come from finite transitions");
        Self { rows, source, size_k, encoder }
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

pub fn build_context(
    buffer: &ReplayBuffer,
    k: usize,
    strategy: Strategy,
    encoder: FeatureEncoder,
    rng: &mut Rng,
) -> Result<Context, ReplayError> {
    if k == 0 {
        return Err(ReplayError::ZeroContext);
    }
    if buffer.is_empty() {
        return Err(ReplayError::EmptyBuffer);
    }
    let n = k.min(buffer.len());
    let source: Vec<Transition> = match strategy {
        Strategy::Recent => buffer.iter().rev().take(n).cloned().collect(),
        Strategy::Uniform => {
            let mut picked = index::sample(rng, buffer.len(), n).into_vec();
            picked.sort_unstable_by(|a, b| b.cmp(a));
            picked.into_iter().map(|i| buffer.get(i).clone()).collect()
        }
    };
    Ok(Context::from_transitions(source, k, encoder))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub tau: f64,
    /// Episode-return floor; transitions from episodes at or below it are dropped.
    pub theta: f64,
    /// Spread of attainable Q-values the tolerance is relative to.
    pub value_range: f64,
}

impl FilterConfig {
    /// Tolerance relative to 1/(1-gamma), the value range for rewards in [0,1].
    pub fn normalized(tau: f64, theta: f64, gamma: f64) -> Self {
        Self { tau, theta, value_range: 1.0 / (1.0 - gamma) }
    }

    pub fn identity() -> Self {
        Self { tau: f64::INFINITY, theta: f64::NEG_INFINITY, value_range: 1.0 }
    }
}

fn keep(t: &Transition, current: &[f64], cfg: &FilterConfig) -> bool {
    if matches!(t.episode_return, Some(r) if r <= cfg.theta) {
        return false;
    }
    let drift = t.q_labels.iter().zip(current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    !(drift > cfg.tau * cfg.value_range)
}

/// Drops low-return and stale-label transitions; survivors keep their
/// order. May return an empty context.
pub fn quality_filter(
    context: &Context,
    mut current_labels: impl FnMut(&Transition) -> Vec<f64>,
    cfg: &FilterConfig,
) -> Context {
    let kept: Vec<Transition> = context.source.iter().filter(|t| keep(t, &current_labels(t), cfg)).cloned().collect();
    Context::from_transitions(kept, context.size_k, context.encoder)
}

/// P_C(. | s, a) over discrete next states, with the number of exact (s,a)
/// matches it was built from (0 when it came from nearest neighbours).
#[derive(Debug, Clone, PartialEq)]
pub struct NextDist {
    pub outcomes: Vec<(usize, f64)>,
    pub exact_matches: usize,
}

pub fn empirical_next_dist(
    context: &Context,
    state: &EnvState,
    action: usize,
    m_min: usize,
) -> Result<NextDist, ReplayError> {
    if context.is_empty() {
        return Err(ReplayError::EmptyContext);
    }
    if m_min == 0 {
        return Err(ReplayError::ZeroMMin);
    }
    let s = state.discrete_index.ok_or(ReplayError::NotDiscrete)?;
    let exact: Vec<&Transition> =
        context.source.iter().filter(|t| t.action == action && t.state.discrete_index == Some(s)).collect();
    let (chosen, exact_matches) = if exact.is_empty() {
        let query = context.encoder.encode(state, action).features;
        let q = context.rows.standardize(&query);
        let mut scored: Vec<(f64, usize)> = context
            .source
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let z = context.rows.standardize(&context.encoder.encode(&t.state, t.action).features);
                (z.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let picked = scored.iter().take(m_min).map(|&(_, i)| &context.source[i]).collect();
        (picked, 0)
    } else {
        let n = exact.len();
        (exact, n)
    };
    let w = 1.0 / chosen.len() as f64;
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for t in chosen {
        let next = t.next_state.discrete_index.ok_or(ReplayError::NotDiscrete)?;
        *acc.entry(next).or_default() += w;
    }
    Ok(NextDist { outcomes: acc.into_iter().collect(), exact_matches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvId, EnvOptions, Environment, FeatureSpec};
    use crate::rng::{stream, Stream};

    fn tr(s: usize, a: usize, next: usize, t: u64) -> Transition {
        Transition {
            state: EnvState::discrete(EnvId::FrozenLake4, s, 0, 0),
            action: a,
            reward: 0.0,
            next_state: EnvState::discrete(EnvId::FrozenLake4, next, 1, 0),
            terminated: false,
            q_labels: vec![0.1 * a as f64, 0.2, 0.3, 0.4],
            timestep: t,
            episode_id: t / 10,
            episode_return: None,
        }
    }

    fn encoder() -> FeatureEncoder {
        Environment::new(EnvId::FrozenLake4, EnvOptions::default(), 0).unwrap().encoder(FeatureSpec::default())
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for t in 0..6 {
            b.push(tr(0, 0, 1, t));
        }
        let ts: Vec<u64> = b.iter().map(|t| t.timestep).collect();
        assert_eq!(ts, vec![3, 4, 5]);
    }

    #[test]
    fn recent_context_takes_newest_first() {
        let mut b = ReplayBuffer::new(10);
        for t in 0..5 {
            b.push(tr(t as usize, 0, 1, t));
        }
        let mut rng = stream(0, Stream::Context);
        let c = build_context(&b, 3, Strategy::Recent, encoder(), &mut rng).unwrap();
        let ts: Vec<u64> = c.source.iter().map(|t| t.timestep).collect();
        assert_eq!(ts, vec![4, 3, 2]);
        assert_eq!(c.rows.len(), 12);
        let big = build_context(&b, 1000, Strategy::Recent, encoder(), &mut rng).unwrap();
        assert_eq!(big.source.len(), 5);
    }

    #[test]
    fn uniform_context_is_distinct() {
        let mut b = ReplayBuffer::new(50);
        for t in 0..50 {
            b.push(tr(0, 0, 1, t));
        }
        let mut rng = stream(3, Stream::Context);
        let c = build_context(&b, 20, Strategy::Uniform, encoder(), &mut rng).unwrap();
        let mut ts: Vec<u64> = c.source.iter().map(|t| t.timestep).collect();
        assert!(ts.windows(2).all(|w| w[0] > w[1]));
        ts.dedup();
        assert_eq!(ts.len(), 20);
    }

    #[test]
    fn empty_buffer_errors() {
        let b = ReplayBuffer::new(4);
        let mut rng = stream(0, Stream::Context);
        assert_eq!(build_context(&b, 3, Strategy::Recent, encoder(), &mut rng).unwrap_err(), ReplayError::EmptyBuffer);
    }

    #[test]
    fn filter_keeps_within_tolerance() {
        let mut t = tr(0, 0, 1, 0);
        t.q_labels = vec![0.5, 0.5, 0.5, 0.5];
        let ctx = Context::from_transitions(vec![t], 4, encoder());
        let cfg = FilterConfig::normalized(0.1, f64::NEG_INFINITY, 0.9);
        let out = quality_filter(&ctx, |_| vec![0.7, 0.5, 0.5, 0.5], &cfg);
        assert_eq!(out.source.len(), 1);
        let out = quality_filter(&ctx, |_| vec![1.6, 0.5, 0.5, 0.5], &cfg);
        assert!(out.is_empty());
    }

    #[test]
    fn filter_drops_low_return_episodes() {
        let mut a = tr(0, 0, 1, 0);
        a.episode_return = Some(-50.0);
        let mut b = tr(1, 0, 2, 1);
        b.episode_return = Some(-10.0);
        let c = tr(2, 0, 3, 2);
        let ctx = Context::from_transitions(vec![c, b, a], 4, encoder());
        let cfg = FilterConfig { tau: f64::INFINITY, theta: -20.0, value_range: 1.0 };
        let out = quality_filter(&ctx, |t| t.q_labels.clone(), &cfg);
        let ts: Vec<u64> = out.source.iter().map(|t| t.timestep).collect();
        assert_eq!(ts, vec![2, 1]);
    }

    #[test]
    fn next_dist_counts_exact_matches() {
        let ctx = Context::from_transitions(
            vec![tr(0, 1, 4, 3), tr(0, 1, 4, 2), tr(0, 1, 1, 1), tr(2, 0, 6, 0)],
            10,
            encoder(),
        );
        let d = empirical_next_dist(&ctx, &EnvState::discrete(EnvId::FrozenLake4, 0, 0, 0), 1, 1).unwrap();
        assert_eq!(d.exact_matches, 3);
        assert_eq!(d.outcomes, vec![(1, 1.0 / 3.0), (4, 2.0 / 3.0)]);
    }

    #[test]
    fn next_dist_nearest_fallback() {
        let ctx = Context::from_transitions(vec![tr(0, 1, 4, 1), tr(10, 2, 11, 0)], 10, encoder());
        // state 1 = (0,1), action 1: nearest is the (0,0) action-1 transition
        let d = empirical_next_dist(&ctx, &EnvState::discrete(EnvId::FrozenLake4, 1, 0, 0), 1, 1).unwrap();
        assert_eq!(d.exact_matches, 0);
        assert_eq!(d.outcomes, vec![(4, 1.0)]);
    }
}
