use std::fmt;
use std::sync::Arc;

use rand::Rng as _;

use super::gates::{refit_gate, switch_gate, GateConfig, RefitConfig, ReturnWindow};
use crate::env::{EnvId, EnvOptions, EnvState, Environment, FeatureEncoder, FeatureSpec, MdpSpec};
use crate::qnet::{epsilon_greedy, td_update, EpsilonSchedule, QNetParams, SgdConfig, TdSample};
use crate::regressor::{Regressor, RegressorKind};
use crate::replay::{build_context, quality_filter, Context, FilterConfig, ReplayBuffer, Strategy, Transition};
use crate::rng::{self, Rng, Stream};
use crate::theory::{value_iteration, ErrorLedger, LedgerTracker, QTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Icl,
    /// Baseline training episode.
    Train,
    /// Evaluation rollout.
    Eval,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Icl => "icl",
            Phase::Train => "train",
            Phase::Eval => "eval",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchMode {
    /// Switch unconditionally once t reaches T0.
    Fixed,
    /// Arm at T0, then wait for the return-quality gate.
    Gated,
    /// Never switch: the warm-up network alone (DQN baseline).
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefitTrigger {
    /// Rebuild the context after every n finished episodes.
    EveryEpisodes(u64),
    Adaptive(RefitConfig),
}

/// A user-supplied finite MDP to run on.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularTask {
    pub mdp: Arc<MdpSpec>,
    pub start: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub env: EnvId,
    pub env_options: EnvOptions,
    pub tabular: Option<TabularTask>,
    pub gamma: f64,
    pub total_steps: u64,
    pub seed: u64,
    pub switch: SwitchMode,
    pub gate: GateConfig,
    pub refit: RefitTrigger,
    pub context_k: usize,
    pub buffer_w: usize,
    pub strategy: Strategy,
    pub regressor: RegressorKind,
    pub sgd: SgdConfig,
    pub hidden: Vec<usize>,
    pub filter_tau: f64,
    pub filter_theta: f64,
    /// Multiplies raw rewards for network training and labels.
    pub reward_scale: f64,
    pub features: FeatureSpec,
    pub ledger: bool,
    pub ledger_m_min: usize,
}

impl EngineConfig {
    /// Per-environment defaults.
    pub fn defaults(env: EnvId) -> Self {
        // (T0, K, total steps, reward scale, epsilon decay steps)
        let (t0, k, total, scale, decay) = match env {
            EnvId::CliffWalking => (20_000, 1_000, 30_000, 0.1, 15_000),
            EnvId::FrozenLake4 | EnvId::FrozenLake8 => (30_000, 1_500, 40_000, 1.0, 4_000),
            EnvId::Taxi => (25_000, 1_000, 200_000, 0.1, 100_000),
            EnvId::CartPole => (20_000, 1_000, 40_000, 0.1, 15_000),
            EnvId::Tabular => (1_000, 200, 3_000, 1.0, 1_000),
        };
        let sgd = SgdConfig {
            learning_rate: 0.05,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.0, decay_steps: decay },
            ..SgdConfig::default()
        };
        let sparse = matches!(env, EnvId::FrozenLake4 | EnvId::FrozenLake8);
        let cartpole = env == EnvId::CartPole;
        let floor = match env {
            EnvId::CliffWalking | EnvId::Taxi => -200.0,
            EnvId::CartPole => 20.0,
            _ => 0.0,
        };
        Self {
            env,
            env_options: EnvOptions {
                horizon: (env != EnvId::Tabular).then(|| env.default_horizon()),
                ..EnvOptions::default()
            },
            tabular: None,
            gamma: 0.99,
            total_steps: total,
            seed: 0,
            switch: if cartpole { SwitchMode::Gated } else { SwitchMode::Fixed },
            gate: GateConfig::new(t0, if sparse { 0.75 } else { 0.5 }, floor),
            refit: if cartpole {
                RefitTrigger::Adaptive(RefitConfig::default())
            } else {
                RefitTrigger::EveryEpisodes(1)
            },
            context_k: k,
            buffer_w: 50_000,
            strategy: Strategy::Recent,
            regressor: RegressorKind::default(),
            sgd,
            hidden: vec![64, 64],
            filter_tau: if cartpole { 0.1 } else { f64::INFINITY },
            filter_theta: if cartpole { floor } else { f64::NEG_INFINITY },
            reward_scale: scale,
            features: FeatureSpec::default(),
            ledger: false,
            ledger_m_min: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", format!("{} outside (0, 1)", self.gamma));
        }
        if self.total_steps == 0 {
            return bad("total_steps", "must be at least 1".into());
        }
        if self.context_k == 0 {
            return bad("context_k", "must be at least 1".into());
        }
        if self.buffer_w < self.context_k {
            return bad("buffer_w", format!("{} is smaller than context_k {}", self.buffer_w, self.context_k));
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive".into());
        }
        if !(self.filter_tau >= 0.0) {
            return bad("filter_tau", format!("{} must be non-negative", self.filter_tau));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale", format!("{} must be positive", self.reward_scale));
        }
        if self.ledger_m_min == 0 {
            return bad("ledger.m_min", "must be at least 1".into());
        }
        if self.env == EnvId::Tabular && self.tabular.is_none() {
            return bad("env", "tabular runs need a supplied model".into());
        }
        if self.ledger && self.env == EnvId::CartPole {
            return bad("ledger", "cartpole has no exact model".into());
        }
        self.gate.validate().map_err(|m| Error::Config(format!("gate: {m}")))?;
        if let RefitTrigger::Adaptive(r) = &self.refit {
            r.validate().map_err(|m| Error::Config(format!("refit: {m}")))?;
        }
        if let RefitTrigger::EveryEpisodes(0) = self.refit {
            return bad("refit", "episode cadence must be at least 1".into());
        }
        self.sgd.validate()?;
        self.regressor.validate()?;
        Ok(())
    }

    pub fn make_env(&self, seed: u64) -> Result<Environment> {
        Ok(match &self.tabular {
            Some(task) if self.env == EnvId::Tabular => {
                Environment::tabular(task.mdp.clone(), task.start, task.horizon, seed)?
            }
            _ => Environment::new(self.env, self.env_options, seed)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: u64,
    pub end_step: u64,
    pub ret: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub curve: Vec<EpisodeRecord>,
    pub ledger: Option<ErrorLedger>,
    pub switch_step: Option<u64>,
}

type ReturnOverride = Box<dyn FnMut(u64, f64) -> f64 + Send>;

/// One TabQL run, advanced one environment step at a time.
pub struct Agent {
    cfg: EngineConfig,
    env: Environment,
    encoder: FeatureEncoder,
    params: QNetParams,
    target: QNetParams,
    buffer: ReplayBuffer,
    regressor: Regressor,
    explore_rng: Rng,
    replay_rng: Rng,
    context_rng: Rng,
    state: EnvState,
    phase: Phase,
    t: u64,
    episodes: u64,
    episode_return: f64,
    updates: u64,
    window: ReturnWindow,
    t_last: u64,
    e_last: u64,
    refits: u64,
    context: Option<Context>,
    switch_step: Option<u64>,
    curve: Vec<EpisodeRecord>,
    oracle: Option<(MdpSpec, QTable)>,
    ledger: Option<LedgerTracker>,
    return_override: Option<ReturnOverride>,
}

impl fmt::Debug for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Agent")
            .field("env", &self.cfg.env)
            .field("phase", &self.phase)
            .field("t", &self.t)
            .field("episodes", &self.episodes)
            .finish()
    }
}

impl Agent {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let regressor = Regressor::from_kind(&cfg.regressor)?;
        Self::with_regressor(cfg, regressor)
    }

    /// Like [`Agent::new`] with an explicit regressor (e.g. an exact table).
    pub fn with_regressor(cfg: EngineConfig, regressor: Regressor) -> Result<Self> {
        cfg.validate()?;
        let mut env = cfg.make_env(cfg.seed)?;
        let encoder = env.encoder(cfg.features);
        let mut init_rng = rng::stream(cfg.seed, Stream::Init);
        let params = QNetParams::init(env.network_input_len(), &cfg.hidden, env.n_actions(), &mut init_rng);
        let oracle = if cfg.ledger {
            let mdp = env.model(cfg.gamma)?.scaled(cfg.reward_scale);
            let q_star = value_iteration(&mdp, cfg.gamma, 1e-12)?;
            Some((mdp, q_star))
        } else {
            None
        };
        let state = env.reset(None)?;
        Ok(Self {
            encoder,
            target: params.clone(),
            params,
            buffer: ReplayBuffer::new(cfg.buffer_w),
            regressor,
            explore_rng: rng::stream(cfg.seed, Stream::Explore),
            replay_rng: rng::stream(cfg.seed, Stream::Replay),
            context_rng: rng::stream(cfg.seed, Stream::Context),
            state,
            phase: Phase::Warmup,
            t: 0,
            episodes: 0,
            episode_return: 0.0,
            updates: 0,
            window: ReturnWindow::new(cfg.gate.window),
            t_last: 0,
            e_last: 0,
            refits: 0,
            context: None,
            switch_step: None,
            curve: Vec::new(),
            oracle,
            ledger: None,
            return_override: None,
            env,
            cfg,
        })
    }

    /// Replaces each finished episode's return, as seen by the switching
    /// gate, with `f(episode, return)`. The learning curve keeps the true
    /// return.
    pub fn override_gate_returns(&mut self, f: impl FnMut(u64, f64) -> f64 + Send + 'static) {
        self.return_override = Some(Box::new(f));
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn refits(&self) -> u64 {
        self.refits
    }

    pub fn last_refit(&self) -> (u64, u64) {
        (self.t_last, self.e_last)
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn params(&self) -> &QNetParams {
        &self.params
    }

    pub fn target_params(&self) -> &QNetParams {
        &self.target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn context(&self) -> Option<&Context> {
        self.context.as_ref()
    }

    pub fn switch_step(&self) -> Option<u64> {
        self.switch_step
    }

    pub fn curve(&self) -> &[EpisodeRecord] {
        &self.curve
    }

    pub fn regressor_mut(&mut self) -> &mut Regressor {
        &mut self.regressor
    }

    pub fn ledger(&self) -> Option<&ErrorLedger> {
        self.ledger.as_ref().map(|l| &l.ledger)
    }

    /// Teacher network values for a state.
    pub fn network_values(&self, state: &EnvState) -> Vec<f64> {
        self.params.forward_unchecked(&self.env.network_input(state))
    }

    /// The teacher network as a table over every discrete state.
    pub fn network_table(&self) -> Option<QTable> {
        let n = self.env.n_states()?;
        let n_actions = self.env.n_actions();
        let mut values = Vec::with_capacity(n * n_actions);
        for s in 0..n {
            values.extend(self.network_values(&EnvState::discrete(self.env.id(), s, 0, s)));
        }
        Some(QTable::from_values(n, n_actions, values))
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.sgd.epsilon.at(self.t)
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.cfg.total_steps
    }

    /// One environment step in the current phase.
    pub fn step(&mut self) -> Result<()> {
        let labels = self.network_values(&self.state);
        let epsilon = self.epsilon();
        let action = match (&self.phase, &self.context) {
            (Phase::Icl, Some(ctx)) => {
                let values =
                    self.regressor.action_values(&ctx.rows, &self.state, self.env.n_actions(), &self.encoder)?;
                epsilon_greedy(&values, epsilon, &mut self.explore_rng)
            }
            _ => epsilon_greedy(&labels, epsilon, &mut self.explore_rng),
        };
        let step = self.env.step(&self.state, action)?;
        self.buffer.push(Transition {
            state: self.state.clone(),
            action,
            reward: step.reward,
            next_state: step.next.clone(),
            terminated: step.terminated,
            q_labels: labels,
            timestep: self.t,
            episode_id: self.episodes,
            episode_return: None,
        });
        self.train()?;
        self.t += 1;
        self.episode_return += step.reward;
        let done = step.done();
        self.state = step.next;
        if done {
            self.finish_episode()?;
        }

        match self.phase {
            Phase::Warmup => {
                let armed = self.t >= self.cfg.gate.t0;
                let fire = match self.cfg.switch {
                    SwitchMode::Fixed => armed,
                    SwitchMode::Gated => armed && done && switch_gate(&self.window, &self.cfg.gate).fire,
                    SwitchMode::Never => false,
                };
                if fire {
                    self.switch()?;
                }
            }
            Phase::Icl => {
                let refit = match self.cfg.refit {
                    RefitTrigger::EveryEpisodes(n) => done && self.episodes - self.e_last >= n,
                    RefitTrigger::Adaptive(r) => {
                        refit_gate(self.t, self.t_last, self.episodes, self.e_last, self.cfg.context_k, &r)
                    }
                };
                if refit {
                    self.refit()?;
                }
            }
            _ => unreachable!("agents only run warm-up and in-context phases"),
        }
        Ok(())
    }

    fn train(&mut self) -> Result<()> {
        let batch_size = self.cfg.sgd.batch_size;
        if self.buffer.len() < batch_size {
            return Ok(());
        }
        let scale = self.cfg.reward_scale;
        let batch: Vec<TdSample> = (0..batch_size)
            .map(|_| {
                let tr = self.buffer.get(self.replay_rng.gen_range(0..self.buffer.len()));
                TdSample {
                    input: self.env.network_input(&tr.state),
                    action: tr.action,
                    reward: tr.reward * scale,
                    next_input: self.env.network_input(&tr.next_state),
                    terminal: tr.terminated,
                }
            })
            .collect();
        td_update(&mut self.params, &self.target, &batch, self.cfg.gamma, self.cfg.sgd.learning_rate)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.sgd.target_sync) {
            self.target = self.params.clone();
        }
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<()> {
        let ret = self.episode_return;
        self.buffer.set_episode_return(self.episodes, ret);
        self.curve.push(EpisodeRecord {
            seed: self.cfg.seed,
            episode: self.episodes,
            end_step: self.t,
            ret,
            phase: self.phase,
        });
        let gate_ret = match &mut self.return_override {
            Some(f) => f(self.episodes, ret),
            None => ret,
        };
        self.window.push(gate_ret);
        self.episodes += 1;
        self.episode_return = 0.0;
        self.state = self.env.reset(None)?;
        Ok(())
    }

    fn switch(&mut self) -> Result<()> {
        self.phase = Phase::Icl;
        self.switch_step = Some(self.t);
        if let Some((mdp, q_star)) = &self.oracle {
            let teacher = self.network_table().expect("oracle runs are discrete");
            self.ledger = Some(LedgerTracker::start(
                mdp.clone(),
                self.env.id(),
                self.cfg.gamma,
                self.cfg.ledger_m_min,
                q_star.clone(),
                teacher,
                self.t,
            ));
        }
        self.refit()
    }

    fn filter_config(&self) -> FilterConfig {
        let (lo, hi) = self.env.reward_range();
        FilterConfig {
            tau: self.cfg.filter_tau,
            theta: self.cfg.filter_theta,
            value_range: (hi - lo) * self.cfg.reward_scale / (1.0 - self.cfg.gamma),
        }
    }

    /// Rebuilds the active context from the most recent transitions.
    pub fn refit(&mut self) -> Result<()> {
        let ctx =
            build_context(&self.buffer, self.cfg.context_k, self.cfg.strategy, self.encoder, &mut self.context_rng)?;
        let filter = self.filter_config();
        let ctx = if filter.tau.is_infinite() && filter.theta == f64::NEG_INFINITY {
            ctx
        } else {
            let filtered = quality_filter(&ctx, |tr| self.network_values(&tr.state), &filter);
            if filtered.is_empty() {
                ctx
            } else {
                filtered
            }
        };
        self.t_last = self.t;
        self.e_last = self.episodes;
        self.refits += 1;
        if let Some(tracker) = &mut self.ledger {
            tracker.record(self.t, &ctx, &mut self.regressor)?;
        }
        self.context = Some(ctx);
        Ok(())
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.into_output())
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput { curve: self.curve, ledger: self.ledger.map(|l| l.ledger), switch_step: self.switch_step }
    }
}

/// Runs one seed to completion.
pub fn run(cfg: EngineConfig) -> Result<RunOutput> {
    Agent::new(cfg)?.run()
}
