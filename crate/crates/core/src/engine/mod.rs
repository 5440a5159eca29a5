//! The TabQL loop: DQN warm-up, gated hand-off to in-context inference,
//! and periodic context refits.

mod gates;
mod run;

pub use gates::{quantile, refit_gate, switch_gate, GateConfig, GateDecision, RefitConfig, ReturnWindow};
pub use run::{run, Agent, EngineConfig, EpisodeRecord, Phase, RefitTrigger, RunOutput, SwitchMode, TabularTask};
