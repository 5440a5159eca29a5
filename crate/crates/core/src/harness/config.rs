//! Flat `key=value` experiment configuration.
//!
//! The `env` key is resolved first and loads that environment's defaults;
//! every other line then overrides a single field, in order. `#` starts a
//! comment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::{EngineConfig, RefitConfig, RefitTrigger, SwitchMode};
use crate::env::EnvId;
use crate::regressor::RegressorKind;
use crate::{format_float, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Tabql,
    TabularQ,
    Dqn,
    Fqi,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Tabql => "tabql",
            Algo::TabularQ => "tabular_q",
            Algo::Dqn => "dqn",
            Algo::Fqi => "fqi",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "tabql" => Algo::Tabql,
            "tabular_q" => Algo::TabularQ,
            "dqn" => Algo::Dqn,
            "fqi" => Algo::Fqi,
            _ => return Err(format!("unknown algo {s:?}")),
        })
    }
}

/// A full experiment: one engine template run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub seeds: Vec<u64>,
    pub engine: EngineConfig,
    /// Step size of the tabular Q-learning baseline.
    pub alpha: f64,
    pub fqi_iterations: usize,
    /// Greedy evaluation episodes for batch baselines.
    pub eval_episodes: usize,
    pub output: Option<PathBuf>,
    knn_k: usize,
    bandwidth: f64,
    endpoint: String,
    refit_episodes: u64,
    refit_adaptive: RefitConfig,
}

const KEYS: &[&str] = &[
    "env",
    "algo",
    "seeds",
    "gamma",
    "total_steps",
    "slippery",
    "horizon",
    "switch",
    "t0",
    "gate.window",
    "gate.g_min",
    "gate.quantile",
    "gate.theta_floor",
    "gate.delta",
    "refit",
    "refit.episodes",
    "refit.rho_stale",
    "refit.e_min",
    "context_k",
    "buffer_w",
    "strategy",
    "regressor",
    "regressor.k",
    "regressor.bandwidth",
    "regressor.endpoint",
    "sgd.learning_rate",
    "sgd.batch_size",
    "sgd.target_sync",
    "sgd.eps_start",
    "sgd.eps_end",
    "sgd.eps_decay",
    "hidden",
    "filter_tau",
    "filter_theta",
    "reward_scale",
    "features.timestep",
    "features.initial_tag",
    "ledger",
    "ledger.m_min",
    "alpha",
    "fqi.iterations",
    "eval_episodes",
    "output",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(|v| parse(key, v)).collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Splits config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl ExperimentConfig {
    pub fn defaults(env: EnvId, algo: Algo) -> Self {
        let engine = EngineConfig::defaults(env);
        let (knn_k, bandwidth) = match engine.regressor {
            RegressorKind::Knn { k } => (k, 1.0),
            RegressorKind::Kernel { bandwidth } => (8, bandwidth),
            _ => (8, 1.0),
        };
        let mut cfg = Self {
            algo,
            seeds: vec![0],
            alpha: 0.5,
            fqi_iterations: 50,
            eval_episodes: 20,
            output: None,
            knn_k,
            bandwidth,
            endpoint: "tcp://127.0.0.1:7878".into(),
            refit_episodes: 1,
            refit_adaptive: RefitConfig::default(),
            engine,
        };
        if algo == Algo::Dqn {
            cfg.engine.switch = SwitchMode::Never;
        }
        cfg
    }

    /// Parses config text followed by `overrides` (each `key=value`).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = parse_pairs(text)?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let last = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let env: EnvId = match last("env") {
            Some(v) => parse("env", &v)?,
            None => return Err(Error::Config("env: required".into())),
        };
        let algo: Algo = match last("algo") {
            Some(v) => v.parse().map_err(|e| Error::Config(format!("algo: {e}")))?,
            None => Algo::Tabql,
        };
        let mut cfg = Self::defaults(env, algo);
        for (k, v) in &pairs {
            if k != "env" && k != "algo" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.engine;
        match key {
            "env" | "algo" => return Err(Error::Config(format!("{key}: only settable when parsing a whole config"))),
            "seeds" => self.seeds = parse_list(key, value)?,
            "gamma" => e.gamma = parse(key, value)?,
            "total_steps" => e.total_steps = parse(key, value)?,
            "slippery" => e.env_options.slippery = parse_bool(key, value)?,
            "horizon" => e.env_options.horizon = Some(parse(key, value)?),
            "switch" => {
                e.switch = match value {
                    "fixed" => SwitchMode::Fixed,
                    "gated" => SwitchMode::Gated,
                    "never" => SwitchMode::Never,
                    _ => return Err(Error::Config(format!("switch: expected fixed, gated or never, got {value:?}"))),
                }
            }
            "t0" => e.gate.t0 = parse(key, value)?,
            "gate.window" => e.gate.window = parse(key, value)?,
            "gate.g_min" => e.gate.g_min = parse(key, value)?,
            "gate.quantile" => e.gate.quantile = parse(key, value)?,
            "gate.theta_floor" => e.gate.theta_floor = parse(key, value)?,
            "gate.delta" => e.gate.delta = parse(key, value)?,
            "refit" => {
                e.refit = match value {
                    "episodes" => RefitTrigger::EveryEpisodes(self.refit_episodes),
                    "adaptive" => RefitTrigger::Adaptive(self.refit_adaptive),
                    _ => return Err(Error::Config(format!("refit: expected episodes or adaptive, got {value:?}"))),
                }
            }
            "refit.episodes" => {
                self.refit_episodes = parse(key, value)?;
                if let RefitTrigger::EveryEpisodes(_) = e.refit {
                    e.refit = RefitTrigger::EveryEpisodes(self.refit_episodes);
                }
            }
            "refit.rho_stale" | "refit.e_min" => {
                if key == "refit.rho_stale" {
                    self.refit_adaptive.rho_stale = parse(key, value)?;
                } else {
                    self.refit_adaptive.e_min = parse(key, value)?;
                }
                if let RefitTrigger::Adaptive(_) = e.refit {
                    e.refit = RefitTrigger::Adaptive(self.refit_adaptive);
                }
            }
            "context_k" => e.context_k = parse(key, value)?,
            "buffer_w" => e.buffer_w = parse(key, value)?,
            "strategy" => e.strategy = value.parse().map_err(|_| Error::Config(format!("strategy: {value:?}")))?,
            "regressor" => {
                e.regressor = match value {
                    "knn" => RegressorKind::Knn { k: self.knn_k },
                    "kernel" => RegressorKind::Kernel { bandwidth: self.bandwidth },
                    "bridge" => RegressorKind::Bridge { endpoint: self.endpoint.clone() },
                    "exact_table" => RegressorKind::ExactTable,
                    _ => return Err(Error::Config(format!("regressor: unknown kind {value:?}"))),
                }
            }
            "regressor.k" => {
                self.knn_k = parse(key, value)?;
                if let RegressorKind::Knn { k } = &mut e.regressor {
                    *k = self.knn_k;
                }
            }
            "regressor.bandwidth" => {
                self.bandwidth = parse(key, value)?;
                if let RegressorKind::Kernel { bandwidth } = &mut e.regressor {
                    *bandwidth = self.bandwidth;
                }
            }
            "regressor.endpoint" => {
                self.endpoint = value.to_string();
                if let RegressorKind::Bridge { endpoint } = &mut e.regressor {
                    *endpoint = self.endpoint.clone();
                }
            }
            "sgd.learning_rate" => e.sgd.learning_rate = parse(key, value)?,
            "sgd.batch_size" => e.sgd.batch_size = parse(key, value)?,
            "sgd.target_sync" => e.sgd.target_sync = parse(key, value)?,
            "sgd.eps_start" => e.sgd.epsilon.start = parse(key, value)?,
            "sgd.eps_end" => e.sgd.epsilon.end = parse(key, value)?,
            "sgd.eps_decay" => e.sgd.epsilon.decay_steps = parse(key, value)?,
            "hidden" => e.hidden = parse_list(key, value)?,
            "filter_tau" => e.filter_tau = parse(key, value)?,
            "filter_theta" => e.filter_theta = parse(key, value)?,
            "reward_scale" => e.reward_scale = parse(key, value)?,
            "features.timestep" => e.features.include_timestep = parse_bool(key, value)?,
            "features.initial_tag" => e.features.include_initial_tag = parse_bool(key, value)?,
            "ledger" => e.ledger = parse_bool(key, value)?,
            "ledger.m_min" => e.ledger_m_min = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "fqi.iterations" => self.fqi_iterations = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "output" => self.output = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            _ => return Err(Error::Config(format!("{key}: unknown key"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let e = &self.engine;
        let f = |v: f64| format_float(v);
        Some(match key {
            "env" => e.env.to_string(),
            "algo" => self.algo.to_string(),
            "seeds" => join(&self.seeds),
            "gamma" => f(e.gamma),
            "total_steps" => e.total_steps.to_string(),
            "slippery" => e.env_options.slippery.to_string(),
            "horizon" => e.env_options.horizon.unwrap_or(e.env.default_horizon()).to_string(),
            "switch" => match e.switch {
                SwitchMode::Fixed => "fixed",
                SwitchMode::Gated => "gated",
                SwitchMode::Never => "never",
            }
            .into(),
            "t0" => e.gate.t0.to_string(),
            "gate.window" => e.gate.window.to_string(),
            "gate.g_min" => e.gate.g_min.to_string(),
            "gate.quantile" => f(e.gate.quantile),
            "gate.theta_floor" => f(e.gate.theta_floor),
            "gate.delta" => f(e.gate.delta),
            "refit" => match e.refit {
                RefitTrigger::EveryEpisodes(_) => "episodes",
                RefitTrigger::Adaptive(_) => "adaptive",
            }
            .into(),
            "refit.episodes" => self.refit_episodes.to_string(),
            "refit.rho_stale" => f(self.refit_adaptive.rho_stale),
            "refit.e_min" => self.refit_adaptive.e_min.to_string(),
            "context_k" => e.context_k.to_string(),
            "buffer_w" => e.buffer_w.to_string(),
            "strategy" => e.strategy.to_string(),
            "regressor" => e.regressor.to_string(),
            "regressor.k" => self.knn_k.to_string(),
            "regressor.bandwidth" => f(self.bandwidth),
            "regressor.endpoint" => self.endpoint.clone(),
            "sgd.learning_rate" => f(e.sgd.learning_rate),
            "sgd.batch_size" => e.sgd.batch_size.to_string(),
            "sgd.target_sync" => e.sgd.target_sync.to_string(),
            "sgd.eps_start" => f(e.sgd.epsilon.start),
            "sgd.eps_end" => f(e.sgd.epsilon.end),
            "sgd.eps_decay" => e.sgd.epsilon.decay_steps.to_string(),
            "hidden" => join(&e.hidden),
            "filter_tau" => f(e.filter_tau),
            "filter_theta" => f(e.filter_theta),
            "reward_scale" => f(e.reward_scale),
            "features.timestep" => e.features.include_timestep.to_string(),
            "features.initial_tag" => e.features.include_initial_tag.to_string(),
            "ledger" => e.ledger.to_string(),
            "ledger.m_min" => e.ledger_m_min.to_string(),
            "alpha" => f(self.alpha),
            "fqi.iterations" => self.fqi_iterations.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "output" => self.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            _ => return None,
        })
    }

    /// Every key with its effective value, in a fixed order. Parsing the
    /// result yields an equal config.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            out.push_str(key);
            out.push('=');
            out.push_str(&self.get(key).expect("every listed key has a value"));
            out.push('\n');
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed required".into()));
        }
        if matches!(self.algo, Algo::TabularQ | Algo::Fqi) && !self.engine.env.is_discrete() {
            return Err(Error::Config(format!("algo: {} needs a discrete environment", self.algo)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha: {} outside (0, 1]", self.alpha)));
        }
        if self.algo == Algo::Fqi && self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes: must be at least 1".into()));
        }
        self.engine.validate()
    }

    /// The engine config for one seed.
    pub fn engine_for(&self, seed: u64) -> EngineConfig {
        EngineConfig { seed, ..self.engine.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_defaults_then_overrides() {
        let cfg = ExperimentConfig::parse("t0=500\n# comment\nenv=cliff\n", &["context_k=64".into()]).unwrap();
        assert_eq!(cfg.engine.env, EnvId::CliffWalking);
        assert_eq!(cfg.engine.gate.t0, 500);
        assert_eq!(cfg.engine.context_k, 64);
        assert_eq!(cfg.engine.total_steps, EngineConfig::defaults(EnvId::CliffWalking).total_steps);
    }

    #[test]
    fn resolved_round_trips() {
        let cfg = ExperimentConfig::parse(
            "env=cartpole\nregressor.bandwidth=0.3\nregressor=kernel\nseeds=3,1,2\nrefit.rho_stale=0.5",
            &[],
        )
        .unwrap();
        assert_eq!(cfg.engine.regressor, RegressorKind::Kernel { bandwidth: 0.3 });
        assert_eq!(cfg.engine.refit, RefitTrigger::Adaptive(RefitConfig { rho_stale: 0.5, e_min: 1 }));
        let again = ExperimentConfig::parse(&cfg.resolved(), &[]).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.resolved(), cfg.resolved());
    }

    #[test]
    fn errors_name_the_field() {
        let msg = |text: &str| ExperimentConfig::parse(text, &[]).unwrap_err().to_string();
        assert!(msg("t0=5").contains("env"));
        assert!(msg("env=cliff\ngamma=1").contains("gamma"));
        assert!(msg("env=cliff\nbogus=1").contains("bogus"));
        assert!(msg("env=cliff\nseeds=").contains("seeds"));
        assert!(msg("env=cliff\ncontext_k=x").contains("context_k"));
        assert!(msg("env=cartpole\nalgo=tabular_q").contains("algo"));
        assert!(msg("env=cliff\nno equals sign").contains("line 2"));
    }

    #[test]
    fn dqn_never_switches() {
        let cfg = ExperimentConfig::parse("env=frozen\nalgo=dqn", &[]).unwrap();
        assert_eq!(cfg.engine.switch, SwitchMode::Never);
    }
}
