//! Environments: CliffWalking, FrozenLake (4x4 and 8x8), Taxi, CartPole, and
//! arbitrary finite MDPs supplied as an [`MdpSpec`].
//!
//! Environments are stateless apart from their random stream: `step` takes
//! the current [`EnvState`] and returns the next one, which lets tests step
//! from any state and compare against the enumerated model.

pub mod cartpole;
mod features;
pub mod gridworld;
mod model;
pub mod taxi;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use thiserror::Error;

use crate::rng::{self, Rng, Stream};

pub use features::{FeatureEncoder, FeatureRow, FeatureSpec};
pub use model::{enumerate_model, EnumerateOptions, MdpSpec};

use gridworld::FrozenMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("invalid initial condition: {0}")]
    InvalidInitialCondition(String),
    #[error("action {action} out of range (environment has {n_actions})")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("{0} has no finite model")]
    NotEnumerable(EnvId),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    CliffWalking,
    FrozenLake4,
    FrozenLake8,
    Taxi,
    CartPole,
    /// A user-supplied finite MDP.
    Tabular,
}

impl EnvId {
    pub fn name(self) -> &'static str {
        match self {
            EnvId::CliffWalking => "cliffwalking",
            EnvId::FrozenLake4 => "frozenlake4",
            EnvId::FrozenLake8 => "frozenlake8",
            EnvId::Taxi => "taxi",
            EnvId::CartPole => "cartpole",
            EnvId::Tabular => "tabular",
        }
    }

    pub fn is_discrete(self) -> bool {
        self != EnvId::CartPole
    }

    /// Default episode cap.
    pub fn default_horizon(self) -> usize {
        match self {
            EnvId::CliffWalking | EnvId::Taxi => 200,
            EnvId::FrozenLake4 | EnvId::FrozenLake8 | EnvId::Tabular => 100,
            EnvId::CartPole => 500,
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cliffwalking" | "cliff" => EnvId::CliffWalking,
            "frozenlake4" | "frozenlake" | "frozen" => EnvId::FrozenLake4,
            "frozenlake8" => EnvId::FrozenLake8,
            "taxi" => EnvId::Taxi,
            "cartpole" => EnvId::CartPole,
            other => return Err(EnvError::UnknownEnv(other.to_string())),
        })
    }
}

/// Identifies the state an episode was reset to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialTag {
    Index(usize),
    /// CartPole reset state in units of 1e-3.
    Quantized([i64; 4]),
}

impl InitialTag {
    pub fn features(&self) -> Vec<f64> {
        match self {
            InitialTag::Index(i) => vec![*i as f64],
            InitialTag::Quantized(q) => q.iter().map(|&v| v as f64).collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            InitialTag::Index(_) => 1,
            InitialTag::Quantized(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Index(usize),
    Continuous([f64; 4]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub env_id: EnvId,
    pub discrete_index: Option<usize>,
    pub continuous: Option<[f64; 4]>,
    pub episode_step: usize,
    pub initial_tag: InitialTag,
}

impl EnvState {
    pub fn discrete(env_id: EnvId, index: usize, episode_step: usize, initial: usize) -> Self {
        Self {
            env_id,
            discrete_index: Some(index),
            continuous: None,
            episode_step,
            initial_tag: InitialTag::Index(initial),
        }
    }

    /// Discrete index; panics on continuous states.
    pub fn index(&self) -> usize {
        self.discrete_index.expect("continuous state has no index")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: EnvState,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct EnvOptions {
    /// FrozenLake only.
    pub slippery: bool,
    pub horizon: Option<usize>,
}


#[derive(Debug, Clone)]
enum Dynamics {
    Cliff,
    Frozen { map: FrozenMap, slippery: bool },
    Taxi,
    CartPole,
    Tabular { mdp: Arc<MdpSpec>, start: usize },
}

#[derive(Debug, Clone)]
pub struct Environment {
    id: EnvId,
    dynamics: Dynamics,
    horizon: usize,
    rng: Rng,
}

impl Environment {
    pub fn new(id: EnvId, options: EnvOptions, seed: u64) -> Result<Self, EnvError> {
        let dynamics = match id {
            EnvId::CliffWalking => Dynamics::Cliff,
            EnvId::FrozenLake4 => Dynamics::Frozen { map: FrozenMap::four(), slippery: options.slippery },
            EnvId::FrozenLake8 => Dynamics::Frozen { map: FrozenMap::eight(), slippery: options.slippery },
            EnvId::Taxi => Dynamics::Taxi,
            EnvId::CartPole => Dynamics::CartPole,
            EnvId::Tabular => {
                return Err(EnvError::UnknownEnv("tabular environments need Environment::tabular".into()))
            }
        };
        Ok(Self {
            id,
            dynamics,
            horizon: options.horizon.unwrap_or(id.default_horizon()),
            rng: rng::stream(seed, Stream::Env),
        })
    }

    /// Finite MDP environment; rewards are `mdp.reward`.
    pub fn tabular(mdp: Arc<MdpSpec>, start: usize, horizon: usize, seed: u64) -> Result<Self, EnvError> {
        if start >= mdp.n_states || mdp.terminal[start] {
            return Err(EnvError::InvalidInitialCondition(format!("start state {start}")));
        }
        Ok(Self {
            id: EnvId::Tabular,
            dynamics: Dynamics::Tabular { mdp, start },
            horizon,
            rng: rng::stream(seed, Stream::Env),
        })
    }

    pub fn id(&self) -> EnvId {
        self.id
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_actions(&self) -> usize {
        match &self.dynamics {
            Dynamics::Cliff | Dynamics::Frozen { .. } => 4,
            Dynamics::Taxi => taxi::N_ACTIONS,
            Dynamics::CartPole => 2,
            Dynamics::Tabular { mdp, .. } => mdp.n_actions,
        }
    }

    pub fn n_states(&self) -> Option<usize> {
        match &self.dynamics {
            Dynamics::Cliff => Some(gridworld::CLIFF_ROWS * gridworld::CLIFF_COLS),
            Dynamics::Frozen { map, .. } => Some(map.n_states()),
            Dynamics::Taxi => Some(taxi::N_STATES),
            Dynamics::CartPole => None,
            Dynamics::Tabular { mdp, .. } => Some(mdp.n_states),
        }
    }

    pub fn slippery(&self) -> bool {
        matches!(self.dynamics, Dynamics::Frozen { slippery: true, .. })
    }

    /// Smallest and largest single-step raw reward.
    pub fn reward_range(&self) -> (f64, f64) {
        match &self.dynamics {
            Dynamics::Cliff => (-100.0, -1.0),
            Dynamics::Frozen { .. } => (0.0, 1.0),
            Dynamics::Taxi => (-10.0, 20.0),
            Dynamics::CartPole => (0.0, 1.0),
            Dynamics::Tabular { mdp, .. } => mdp.raw_range,
        }
    }

    /// Episode-return range used to normalize returns to [0, 1]: the failure
    /// floor (horizon timeout) and the best achievable return.
    pub fn return_range(&self) -> (f64, f64) {
        match &self.dynamics {
            Dynamics::Cliff => (-(self.horizon as f64), -13.0),
            Dynamics::Frozen { .. } => (0.0, 1.0),
            Dynamics::Taxi => (-(self.horizon as f64), 20.0),
            Dynamics::CartPole => (0.0, self.horizon as f64),
            Dynamics::Tabular { mdp, .. } => {
                (mdp.raw_range.0 * self.horizon as f64, mdp.raw_range.1 * self.horizon as f64)
            }
        }
    }

    pub fn normalize_return(&self, ret: f64) -> f64 {
        let (lo, hi) = self.return_range();
        ((ret - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Valid explicit starting states for discrete environments.
    pub fn initial_conditions(&self) -> Vec<usize> {
        match &self.dynamics {
            Dynamics::Taxi => taxi::initial_states(),
            Dynamics::CartPole => Vec::new(),
            _ => (0..self.n_states().unwrap()).filter(|&s| self.valid_start(s)).collect(),
        }
    }

    fn valid_start(&self, s: usize) -> bool {
        match &self.dynamics {
            Dynamics::Cliff => s < 48 && s != gridworld::CLIFF_GOAL && !gridworld::cliff_is_cliff(s),
            Dynamics::Frozen { map, .. } => s < map.n_states() && !map.is_terminal(s),
            Dynamics::Taxi => {
                s < taxi::N_STATES && {
                    let t = taxi::decode(s);
                    t.passenger < taxi::IN_TAXI && t.passenger != t.destination
                }
            }
            Dynamics::CartPole => false,
            Dynamics::Tabular { mdp, .. } => s < mdp.n_states && !mdp.terminal[s],
        }
    }

    pub fn reset(&mut self, initial: Option<InitialCondition>) -> Result<EnvState, EnvError> {
        if let Dynamics::CartPole = self.dynamics {
            let phys = match initial {
                None => std::array::from_fn(|_| self.rng.gen_range(-0.05..0.05)),
                Some(InitialCondition::Continuous(v)) => {
                    if v.iter().any(|x| !x.is_finite()) || cartpole::out_of_bounds(&v) {
                        return Err(EnvError::InvalidInitialCondition(format!("{v:?}")));
                    }
                    v
                }
                Some(InitialCondition::Index(i)) => {
                    return Err(EnvError::InvalidInitialCondition(format!("index {i} for cartpole")))
                }
            };
            return Ok(EnvState {
                env_id: self.id,
                discrete_index: None,
                continuous: Some(phys),
                episode_step: 0,
                initial_tag: InitialTag::Quantized(phys.map(|v| (v * 1e3).round() as i64)),
            });
        }
        let index = match initial {
            Some(InitialCondition::Index(i)) => {
                if !self.valid_start(i) {
                    return Err(EnvError::InvalidInitialCondition(format!("state {i} for {}", self.id)));
                }
                i
            }
            Some(InitialCondition::Continuous(_)) => {
                return Err(EnvError::InvalidInitialCondition(format!("continuous state for {}", self.id)))
            }
            None => match &self.dynamics {
                Dynamics::Cliff => gridworld::CLIFF_START,
                Dynamics::Frozen { .. } => 0,
                Dynamics::Taxi => {
                    let starts = taxi::initial_states();
                    starts[self.rng.gen_range(0..starts.len())]
                }
                Dynamics::Tabular { start, .. } => *start,
                Dynamics::CartPole => unreachable!(),
            },
        };
        Ok(EnvState::discrete(self.id, index, 0, index))
    }

    /// Terminal states: goal/hole/delivered passenger/pole fallen. Does not
    /// include horizon truncation.
    pub fn is_terminal(&self, state: &EnvState) -> bool {
        match (&self.dynamics, state.discrete_index, state.continuous) {
            (Dynamics::Cliff, Some(s), _) => s == gridworld::CLIFF_GOAL,
            (Dynamics::Frozen { map, .. }, Some(s), _) => map.is_terminal(s),
            (Dynamics::Taxi, Some(s), _) => taxi::is_terminal(s),
            (Dynamics::Tabular { mdp, .. }, Some(s), _) => mdp.terminal[s],
            (Dynamics::CartPole, _, Some(p)) => cartpole::out_of_bounds(&p),
            _ => false,
        }
    }

    /// Full outcome list for a discrete (state, action).
    pub fn outcomes(&self, state: usize, action: usize) -> Result<Vec<Outcome>, EnvError> {
        Ok(match &self.dynamics {
            Dynamics::Cliff => {
                if state == gridworld::CLIFF_GOAL {
                    vec![Outcome { prob: 1.0, next: state, reward: 0.0, terminated: true }]
                } else {
                    gridworld::cliff_outcomes(state, action)
                }
            }
            Dynamics::Frozen { map, slippery } => map.outcomes(state, action, *slippery),
            Dynamics::Taxi => taxi::outcomes(state, action),
            Dynamics::Tabular { mdp, .. } => {
                let sa = state * mdp.n_actions + action;
                mdp.transitions[sa]
                    .iter()
                    .map(|&(next, prob)| Outcome { prob, next, reward: mdp.reward[sa], terminated: mdp.terminal[next] })
                    .collect()
            }
            Dynamics::CartPole => return Err(EnvError::NotEnumerable(EnvId::CartPole)),
        })
    }

    pub fn step(&mut self, state: &EnvState, action: usize) -> Result<Step, EnvError> {
        let n_actions = self.n_actions();
        if action >= n_actions {
            return Err(EnvError::ActionOutOfRange { action, n_actions });
        }
        if self.is_terminal(state) || state.episode_step >= self.horizon {
            return Err(EnvError::StepAfterDone);
        }
        let episode_step = state.episode_step + 1;
        if let Some(phys) = state.continuous {
            let next = cartpole::integrate(&phys, action);
            let terminated = cartpole::out_of_bounds(&next);
            return Ok(Step {
                next: EnvState { continuous: Some(next), episode_step, ..state.clone() },
                reward: 1.0,
                terminated,
                truncated: !terminated && episode_step >= self.horizon,
            });
        }
        let outcomes = self.outcomes(state.index(), action)?;
        let chosen = if outcomes.len() == 1 {
            outcomes[0]
        } else {
            let u: f64 = self.rng.gen();
            let mut acc = 0.0;
            *outcomes
                .iter()
                .find(|o| {
                    acc += o.prob;
                    u < acc
                })
                .unwrap_or(outcomes.last().unwrap())
        };
        Ok(Step {
            next: EnvState { discrete_index: Some(chosen.next), episode_step, ..state.clone() },
            reward: chosen.reward,
            terminated: chosen.terminated,
            truncated: !chosen.terminated && episode_step >= self.horizon,
        })
    }

    /// Native decoded components of a state (grid row/col, Taxi 4-tuple, raw
    /// CartPole vector, or the bare index for tabular MDPs).
    pub fn decode(&self, state: &EnvState) -> Vec<f64> {
        self.encoder(FeatureSpec::default()).decode(state)
    }

    pub fn encoder(&self, spec: FeatureSpec) -> FeatureEncoder {
        let decoder = match &self.dynamics {
            Dynamics::Cliff => features::Decoder::Grid { ncol: gridworld::CLIFF_COLS },
            Dynamics::Frozen { map, .. } => features::Decoder::Grid { ncol: map.ncol() },
            Dynamics::Taxi => features::Decoder::Taxi,
            Dynamics::CartPole => features::Decoder::Continuous,
            Dynamics::Tabular { .. } => features::Decoder::Index,
        };
        let tag_len = if self.id == EnvId::CartPole { InitialTag::Quantized([0; 4]).len() } else { 1 };
        FeatureEncoder::new(decoder, spec, tag_len)
    }

    /// Input vector for the Q-network: one-hot index for discrete states,
    /// raw components for CartPole.
    pub fn network_input(&self, state: &EnvState) -> Vec<f64> {
        match (state.discrete_index, state.continuous) {
            (Some(s), _) => {
                let mut v = vec![0.0; self.n_states().unwrap()];
                v[s] = 1.0;
                v
            }
            (None, Some(p)) => p.to_vec(),
            _ => unreachable!("state without payload"),
        }
    }

    pub fn network_input_len(&self) -> usize {
        self.n_states().unwrap_or(4)
    }

    /// Exact model of a discrete environment under these options.
    pub fn model(&self, gamma: f64) -> Result<MdpSpec, EnvError> {
        match &self.dynamics {
            Dynamics::Tabular { mdp, .. } => {
                let mut m = (**mdp).clone();
                m.gamma = gamma;
                Ok(m)
            }
            _ => enumerate_model(self.id, EnumerateOptions { gamma, slippery: self.slippery() }),
        }
    }
}
