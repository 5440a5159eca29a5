//! Writing learning curves to CSV, reading them back and plotting mean and
//! standard-deviation bands for two algorithms.

use std::path::PathBuf;

use tabql::env::EnvId;
use tabql::harness::{read_curve, render_svg, run_experiment, series, Algo, ExperimentConfig};

fn main() -> tabql::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/plotting".into()));
    let mut lines = Vec::new();
    for algo in [Algo::Tabql, Algo::Dqn] {
        let mut cfg = ExperimentConfig::defaults(EnvId::CliffWalking, algo);
        cfg.seeds = vec![0, 1, 2];
        cfg.engine.total_steps = 15_000;
        let dir = out.join(algo.name());
        run_experiment(&cfg)?.write(&cfg, &dir)?;
        let rows = read_curve(&dir.join("curve.csv"))?;
        lines.push(series(algo.name(), &rows));
    }
    let svg = out.join("cliff.svg");
    render_svg(&lines, "CliffWalking", &svg)?;
    println!("wrote {}", svg.display());
    Ok(())
}
