//! TabQL against its baselines on CliffWalking at the same step budget:
//! plain DQN, tabular Q-learning and fitted Q-iteration on random data.

use tabql::env::EnvId;
use tabql::harness::{final_mean, run_experiment, Algo, ExperimentConfig};

fn main() -> tabql::Result<()> {
    for algo in [Algo::Tabql, Algo::Dqn, Algo::TabularQ, Algo::Fqi] {
        let mut cfg = ExperimentConfig::defaults(EnvId::CliffWalking, algo);
        cfg.seeds = vec![0, 1];
        match algo {
            // one-step updates need more experience than the network
            Algo::TabularQ => cfg.engine.total_steps = 100_000,
            // random data, so a smaller set covers the grid just as well
            Algo::Fqi => {
                cfg.engine.total_steps = 5_000;
                cfg.fqi_iterations = 30;
            }
            _ => {}
        }
        let out = run_experiment(&cfg)?;
        let episodes: usize = out.runs.iter().map(|(_, r)| r.curve.len()).sum();
        println!("{:<10} final mean {:>8.2}  ({episodes} episodes)", algo.name(), final_mean(&out, 50));
    }
    Ok(())
}
