//! Exact finite models.

use super::gridworld::{self, FrozenMap};
use super::{taxi, EnvError, EnvId, Outcome};

/// Finite discounted MDP. Transition and reward vectors are indexed by
/// `s * n_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Expected reward, affinely rescaled into [0, 1].
    pub reward: Vec<f64>,
    /// Expected reward in environment units.
    pub raw_reward: Vec<f64>,
    /// Single-step raw reward range used for the rescaling.
    pub raw_range: (f64, f64),
    pub terminal: Vec<bool>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerateOptions {
    pub gamma: f64,
    /// FrozenLake only.
    pub slippery: bool,
}

impl MdpSpec {
    /// Builds a model from per-(s,a) outcome lists with raw rewards. Terminal
    /// states are forced to self-loop with reward 0.
    pub fn from_outcomes(
        n_states: usize,
        n_actions: usize,
        outcomes: impl Fn(usize, usize) -> Vec<Outcome>,
        terminal: Vec<bool>,
        raw_range: (f64, f64),
        gamma: f64,
    ) -> Result<Self, EnvError> {
        let (lo, hi) = raw_range;
        if !(hi > lo) {
            return Err(EnvError::InvalidModel(format!("empty reward range {raw_range:?}")));
        }
        let mut transitions = Vec::with_capacity(n_states * n_actions);
        let mut reward = Vec::with_capacity(n_states * n_actions);
        let mut raw_reward = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                if terminal[s] {
                    transitions.push(vec![(s, 1.0)]);
                    reward.push(0.0);
                    raw_reward.push(0.0);
                    continue;
                }
                let outs = outcomes(s, a);
                raw_reward.push(outs.iter().map(|o| o.prob * o.reward).sum());
                reward.push(outs.iter().map(|o| o.prob * (o.reward - lo) / (hi - lo)).sum());
                transitions.push(outs.iter().map(|o| (o.next, o.prob)).collect());
            }
        }
        let spec = Self { n_states, n_actions, transitions, reward, raw_reward, raw_range, terminal, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// Model with explicit normalized rewards; raw rewards are the same values.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        gamma: f64,
    ) -> Result<Self, EnvError> {
        let spec = Self {
            n_states,
            n_actions,
            transitions,
            raw_reward: reward.clone(),
            reward,
            raw_range: (0.0, 1.0),
            terminal,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let sa = self.n_states * self.n_actions;
        if self.transitions.len() != sa || self.reward.len() != sa || self.terminal.len() != self.n_states {
            return Err(EnvError::InvalidModel("table sizes disagree with n_states x n_actions".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(EnvError::InvalidModel(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-12 || row.iter().any(|&(n, p)| n >= self.n_states || p < 0.0) {
                return Err(EnvError::InvalidModel(format!("bad transition row for pair {i}")));
            }
        }
        Ok(())
    }

    pub fn sa(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Same model with rewards in environment units.
    pub fn raw(&self) -> Self {
        self.scaled(1.0)
    }

    /// Same model with rewards `c * raw`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { reward: self.raw_reward.iter().map(|r| r * c).collect(), ..self.clone() }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }
}

/// Exhaustive model of a discrete environment.
pub fn enumerate_model(env: EnvId, options: EnumerateOptions) -> Result<MdpSpec, EnvError> {
    let gamma = options.gamma;
    match env {
        EnvId::CliffWalking => {
            let n = gridworld::CLIFF_ROWS * gridworld::CLIFF_COLS;
            let terminal = (0..n).map(|s| s == gridworld::CLIFF_GOAL).collect();
            MdpSpec::from_outcomes(n, 4, gridworld::cliff_outcomes, terminal, (-100.0, -1.0), gamma)
        }
        EnvId::FrozenLake4 | EnvId::FrozenLake8 => {
            let map = if env == EnvId::FrozenLake4 { FrozenMap::four() } else { FrozenMap::eight() };
            let terminal = (0..map.n_states()).map(|s| map.is_terminal(s)).collect();
            MdpSpec::from_outcomes(
                map.n_states(),
                4,
                |s, a| map.outcomes(s, a, options.slippery),
                terminal,
                (0.0, 1.0),
                gamma,
            )
        }
        EnvId::Taxi => {
            let terminal = (0..taxi::N_STATES).map(taxi::is_terminal).collect();
            MdpSpec::from_outcomes(taxi::N_STATES, taxi::N_ACTIONS, taxi::outcomes, terminal, (-10.0, 20.0), gamma)
        }
        EnvId::CartPole => Err(EnvError::NotEnumerable(env)),
        EnvId::Tabular => Err(EnvError::InvalidModel("tabular models are supplied, not enumerated".into())),
    }
}
