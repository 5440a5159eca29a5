//! Experiment runner: TabQL and baselines over seeds, sweeps, cross-seed
//! generalization, and CSV / SVG output.

mod baselines;
mod config;
mod csv_io;
mod generalization;
mod plot;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use baselines::{evaluate, fqi, random_dataset, tabular_q, FqiPolicy};
pub use config::{parse_pairs, Algo, ExperimentConfig};
pub use csv_io::{curve_to_string, ledger_to_string, read_curve, write_file, CURVE_HEADER, LEDGER_HEADER};
pub use generalization::{cross_seed_generalization, summarize, GeneralizationConfig, GeneralizationRow};
pub use plot::{band, render_svg, series, BandPoint, Series};

use crate::engine::{Agent, EngineConfig, RunOutput, SwitchMode};
use crate::regressor::Regressor;
use crate::{Error, Result};

/// Runs one seed of `algo` with the given engine config.
pub fn run_seed(cfg: &ExperimentConfig, engine: EngineConfig) -> Result<RunOutput> {
    match cfg.algo {
        Algo::Tabql => Agent::new(engine)?.run(),
        Algo::Dqn => Agent::new(EngineConfig { switch: SwitchMode::Never, ..engine })?.run(),
        Algo::TabularQ => Ok(tabular_q(&engine, cfg.alpha)?.0),
        Algo::Fqi => {
            engine.validate()?;
            let mut env = engine.make_env(engine.seed)?;
            let data = random_dataset(&mut env, engine.total_steps, engine.seed)?;
            let mut regressor = Regressor::from_kind(&engine.regressor)?;
            let encoder = env.encoder(engine.features);
            let policy = fqi(&data, encoder, env.n_actions(), &mut regressor, engine.gamma, cfg.fqi_iterations)?;
            let curve = evaluate(&mut env, cfg.eval_episodes, engine.seed, |s| policy.greedy(&mut regressor, s))?;
            Ok(RunOutput { curve, ledger: None, switch_step: None })
        }
    }
}

/// Per-seed outputs in config seed order.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<(u64, RunOutput)>,
}

impl ExperimentOutput {
    pub fn curve_csv(&self) -> String {
        let rows: Vec<_> = self.runs.iter().flat_map(|(_, r)| r.curve.iter().cloned()).collect();
        curve_to_string(&rows)
    }

    pub fn ledger_csv(&self) -> Option<String> {
        let ledgers: Vec<_> = self.runs.iter().filter_map(|(s, r)| r.ledger.as_ref().map(|l| (*s, l))).collect();
        (!ledgers.is_empty()).then(|| ledger_to_string(&ledgers))
    }

    /// Writes `curve.csv`, `ledger.csv` when any ledger was recorded, and
    /// the resolved config as `config.resolved`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut put = |name: &str, text: &str| -> Result<()> {
            let path = dir.join(name);
            write_file(&path, text)?;
            written.push(path);
            Ok(())
        };
        put("curve.csv", &self.curve_csv())?;
        if let Some(ledger) = self.ledger_csv() {
            put("ledger.csv", &ledger)?;
        }
        put("config.resolved", &cfg.resolved())?;
        Ok(written)
    }
}

/// One independent run per seed, in parallel; results are assembled in
/// seed order after all runs finish.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let results: Vec<Result<RunOutput>> =
        cfg.seeds.par_iter().map(|&seed| run_seed(cfg, cfg.engine_for(seed))).collect();
    let runs = cfg.seeds.iter().copied().zip(results).map(|(s, r)| r.map(|r| (s, r))).collect::<Result<_>>()?;
    Ok(ExperimentOutput { runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    T0,
    ContextK,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::T0 => "t0",
            SweepParam::ContextK => "k",
        })
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t0" | "T0" => Ok(SweepParam::T0),
            "k" | "context_k" => Ok(SweepParam::ContextK),
            _ => Err(Error::Config(format!("param: expected t0 or k, got {s:?}"))),
        }
    }
}

/// The config for one sweep point. T0 sweeps force fixed switching.
pub fn sweep_point(cfg: &ExperimentConfig, param: SweepParam, value: u64) -> ExperimentConfig {
    let mut point = cfg.clone();
    match param {
        SweepParam::T0 => {
            point.engine.gate.t0 = value;
            point.engine.switch = SwitchMode::Fixed;
        }
        SweepParam::ContextK => point.engine.context_k = value as usize,
    }
    point
}

/// Runs every (value, seed) pair in parallel; outputs are tagged by value,
/// in the order given.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[u64]) -> Result<Vec<(u64, ExperimentOutput)>> {
    if values.is_empty() {
        return Err(Error::Config("values: at least one sweep value required".into()));
    }
    let points: Vec<ExperimentConfig> = values.iter().map(|&v| sweep_point(cfg, param, v)).collect();
    for p in &points {
        p.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let mut results: Vec<Result<RunOutput>> =
        jobs.par_iter().map(|&(i, seed)| run_seed(&points[i], points[i].engine_for(seed))).collect();
    let mut out = Vec::with_capacity(values.len());
    let mut it = results.drain(..);
    for &v in values {
        let mut runs = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            runs.push((seed, it.next().expect("one result per job")?));
        }
        out.push((v, ExperimentOutput { runs }));
    }
    Ok(out)
}

/// Mean over seeds of each seed's mean return across its last `n` episodes.
pub fn final_mean(output: &ExperimentOutput, n: usize) -> f64 {
    let per_seed: Vec<f64> = output.runs.iter().map(|(_, r)| tail_mean(&r.curve, n)).collect();
    per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64
}

/// Mean return of the last `n` records (all of them if fewer).
pub fn tail_mean(curve: &[crate::engine::EpisodeRecord], n: usize) -> f64 {
    let tail = &curve[curve.len().saturating_sub(n)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().map(|r| r.ret).sum::<f64>() / tail.len() as f64
}
