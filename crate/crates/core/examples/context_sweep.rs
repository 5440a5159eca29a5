//! Context size K on CliffWalking. Returns saturate once the context covers
//! the states the greedy path visits.

use tabql::env::EnvId;
use tabql::harness::{final_mean, sweep, Algo, ExperimentConfig, SweepParam};

fn main() -> tabql::Result<()> {
    let mut cfg = ExperimentConfig::defaults(EnvId::CliffWalking, Algo::Tabql);
    cfg.seeds = vec![0, 1];
    let mut previous: Option<f64> = None;
    for (k, out) in sweep(&cfg, SweepParam::ContextK, &[50, 200, 1_000])? {
        let m = final_mean(&out, 50);
        let gain = previous.map(|p| format!("{:+.2}", m - p)).unwrap_or_default();
        println!("K={k:>5}: {m:>8.2} {gain}");
        previous = Some(m);
    }
    Ok(())
}
