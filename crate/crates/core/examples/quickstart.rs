//! One TabQL run on CliffWalking: DQN warm-up, switch to in-context
//! inference, then greedy rollouts from a k-NN over recent transitions.
//!
//! ```text
//! cargo run --release --example quickstart [seed]
//! ```

use tabql::engine::{run, EngineConfig, Phase};
use tabql::env::EnvId;
use tabql::harness::tail_mean;

fn main() -> tabql::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = EngineConfig::defaults(EnvId::CliffWalking);
    cfg.seed = seed;

    let out = run(cfg)?;
    let warmup = out.curve.iter().filter(|r| r.phase == Phase::Warmup).count();
    println!("episodes: {} ({warmup} in warm-up)", out.curve.len());
    match out.switch_step {
        Some(t) => println!("switched to in-context inference at step {t}"),
        None => println!("never switched; this was a DQN run"),
    }
    println!("mean return, last 50 episodes: {:.2}", tail_mean(&out.curve, 50));
    Ok(())
}
