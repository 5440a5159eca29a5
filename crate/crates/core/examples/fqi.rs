//! Fitted Q-iteration from a uniformly random dataset on FrozenLake, with
//! three different fitters.

use tabql::env::{EnvId, EnvOptions, Environment, FeatureSpec};
use tabql::harness::{evaluate, fqi, random_dataset};
use tabql::regressor::{Regressor, RegressorKind};

fn main() -> tabql::Result<()> {
    let options = EnvOptions { slippery: false, ..EnvOptions::default() };
    let mut env = Environment::new(EnvId::FrozenLake4, options, 0)?;
    let data = random_dataset(&mut env, 5_000, 0)?;
    let encoder = env.encoder(FeatureSpec { include_timestep: false, include_initial_tag: false });
    for kind in [RegressorKind::ExactTable, RegressorKind::Knn { k: 8 }, RegressorKind::Kernel { bandwidth: 0.5 }] {
        let mut reg = Regressor::from_kind(&kind)?;
        let policy = fqi(&data, encoder, env.n_actions(), &mut reg, 0.95, 30)?;
        let evals = evaluate(&mut env, 20, 1, |s| policy.greedy(&mut reg, s))?;
        let mean = evals.iter().map(|r| r.ret).sum::<f64>() / evals.len() as f64;
        println!("{kind:?}: mean greedy return {mean:.2} over {} episodes", evals.len());
    }
    Ok(())
}
