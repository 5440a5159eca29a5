//! Driving the agent one environment step at a time, watching the phase,
//! epsilon and refit counters change around the switch.

use tabql::engine::{Agent, EngineConfig, Phase, SwitchMode};
use tabql::env::EnvId;

fn main() -> tabql::Result<()> {
    let mut cfg = EngineConfig::defaults(EnvId::FrozenLake4);
    cfg.env_options.slippery = false;
    cfg.total_steps = 6_000;
    cfg.switch = SwitchMode::Fixed;
    cfg.gate.t0 = 3_000;
    cfg.sgd.epsilon.decay_steps = 2_000;

    let mut agent = Agent::new(cfg)?;
    let mut phase = agent.phase();
    while !agent.is_done() {
        agent.step()?;
        if agent.phase() != phase {
            phase = agent.phase();
            println!("t={:>5}  phase -> {}  epsilon {:.3}", agent.t(), phase.name(), agent.epsilon());
        }
        if agent.t() % 1_000 == 0 {
            println!(
                "t={:>5}  episodes {:>4}  td updates {:>5}  refits {:>3}  buffer {}",
                agent.t(),
                agent.episodes(),
                agent.updates(),
                agent.refits(),
                agent.buffer().len()
            );
        }
    }
    if phase == Phase::Icl {
        let ctx = agent.context().expect("context exists after the switch");
        println!("final context: {} transitions, {} rows", ctx.source.len(), ctx.rows.len());
    }
    Ok(())
}
