//! Fixed switch thresholds on deterministic FrozenLake. Too early a switch
//! freezes a context labeled by an untrained network.
//!
//! Writes one directory per threshold plus `t0_sweep.svg` under the given
//! output dir (default `out/t0_sweep`). Fifteen full runs; a few minutes.

use std::path::PathBuf;

use tabql::env::EnvId;
use tabql::harness::{final_mean, render_svg, series, sweep, tail_mean, Algo, ExperimentConfig, SweepParam};

fn main() -> tabql::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/t0_sweep".into()));
    let mut cfg = ExperimentConfig::defaults(EnvId::FrozenLake4, Algo::Tabql);
    cfg.engine.env_options.slippery = false;
    cfg.seeds = (0..5).collect();

    let arms = sweep(&cfg, SweepParam::T0, &[100, 5_000, 30_000])?;
    let mut lines = Vec::new();
    for (t0, result) in &arms {
        result.write(&cfg, &out.join(format!("t0_{t0}")))?;
        let rows: Vec<_> = result.runs.iter().flat_map(|(_, r)| r.curve.clone()).collect();
        lines.push(series(format!("T0={t0}"), &rows));
        let per_seed: Vec<String> =
            result.runs.iter().map(|(_, r)| format!("{:.2}", tail_mean(&r.curve, 50))).collect();
        println!("T0={t0:>5}: final mean {:.3}  per seed [{}]", final_mean(result, 50), per_seed.join(", "));
    }
    render_svg(&lines, "FrozenLake, fixed T0", &out.join("t0_sweep.svg"))?;
    println!("wrote {}", out.display());
    Ok(())
}
