use tabql::engine::{Agent, EngineConfig, Phase, RefitConfig, RefitTrigger, SwitchMode};
use tabql::env::EnvId;
use tabql::harness::curve_to_string;
use tabql::regressor::Regressor;
use tabql::theory::value_iteration;

fn small(env: EnvId) -> EngineConfig {
    let mut cfg = EngineConfig::defaults(env);
    cfg.total_steps = 1_500;
    cfg.gate.t0 = 500;
    cfg.context_k = 100;
    cfg.hidden = vec![16];
    cfg.sgd.batch_size = 16;
    cfg.sgd.target_sync = 50;
    cfg.sgd.epsilon.decay_steps = 400;
    cfg
}

#[test]
fn scripted_returns_switch_at_episode_forty() {
    let mut cfg = small(EnvId::FrozenLake4);
    cfg.switch = SwitchMode::Gated;
    cfg.gate.t0 = 1;
    cfg.gate.theta_floor = 0.0;
    cfg.total_steps = 5_000;
    let mut agent = Agent::new(cfg).unwrap();
    agent.override_gate_returns(|episode, _| if episode >= 20 { 10.0 } else { 0.0 });
    while agent.phase() == Phase::Warmup && !agent.is_done() {
        agent.step().unwrap();
    }
    assert_eq!(agent.episodes(), 40);
    assert_eq!(agent.switch_step(), Some(agent.curve()[39].end_step));
    assert!(agent.curve().iter().all(|r| r.phase == Phase::Warmup));
    agent.run().unwrap();
}

#[test]
fn gate_never_met_keeps_warming_up() {
    let mut cfg = small(EnvId::FrozenLake4);
    cfg.switch = SwitchMode::Gated;
    cfg.gate.theta_floor = 100.0;
    let out = Agent::new(cfg).unwrap().run().unwrap();
    assert_eq!(out.switch_step, None);
    assert!(out.curve.iter().all(|r| r.phase == Phase::Warmup));
}

#[test]
fn short_run_degenerates_to_dqn() {
    let mut cfg = small(EnvId::CliffWalking);
    cfg.gate.t0 = 10_000;
    let out = Agent::new(cfg.clone()).unwrap().run().unwrap();
    let mut dqn = cfg;
    dqn.switch = SwitchMode::Never;
    assert_eq!(out.switch_step, None);
    assert_eq!(curve_to_string(&out.curve), curve_to_string(&Agent::new(dqn).unwrap().run().unwrap().curve));
}

#[test]
fn single_switch_after_t0() {
    for env in [EnvId::CliffWalking, EnvId::FrozenLake4] {
        let cfg = small(env);
        let t0 = cfg.gate.t0;
        let mut agent = Agent::new(cfg).unwrap();
        let mut flips = Vec::new();
        let mut last = agent.phase();
        while !agent.is_done() {
            agent.step().unwrap();
            if agent.phase() != last {
                flips.push((last, agent.phase(), agent.t()));
                last = agent.phase();
            }
        }
        assert_eq!(flips.len(), 1, "{env:?}");
        assert_eq!((flips[0].0, flips[0].1), (Phase::Warmup, Phase::Icl));
        assert!(flips[0].2 >= t0);
        assert_eq!(agent.switch_step(), Some(flips[0].2));
    }
}

#[test]
fn labels_come_from_the_network_at_push_time() {
    let mut agent = Agent::new(small(EnvId::CliffWalking)).unwrap();
    while !agent.is_done() {
        let expected = agent.network_values(agent.state());
        let before = agent.params().clone();
        agent.step().unwrap();
        let pushed = agent.buffer().iter().last().unwrap();
        assert_eq!(pushed.q_labels, expected);
        if agent.phase() == Phase::Icl && agent.updates() > 0 {
            assert_ne!(agent.params(), &before, "post-switch steps still train the network");
        }
    }
    assert!(agent.switch_step().is_some());
}

#[test]
fn buffer_holds_min_of_steps_and_capacity() {
    let mut cfg = small(EnvId::FrozenLake4);
    cfg.buffer_w = 120;
    cfg.total_steps = 300;
    let mut agent = Agent::new(cfg).unwrap();
    for k in 1..=300u64 {
        agent.step().unwrap();
        assert_eq!(agent.buffer().len(), (k as usize).min(120));
    }
}

#[test]
fn target_network_only_changes_at_sync() {
    let cfg = small(EnvId::FrozenLake4);
    let sync = cfg.sgd.target_sync;
    let mut agent = Agent::new(cfg).unwrap();
    let mut snapshot = agent.target_params().clone();
    let mut last_updates = 0;
    while !agent.is_done() {
        agent.step().unwrap();
        if agent.updates() != last_updates && agent.updates().is_multiple_of(sync) {
            assert_eq!(agent.target_params(), agent.params());
            snapshot = agent.params().clone();
        } else {
            assert_eq!(agent.target_params().to_bytes(), snapshot.to_bytes());
        }
        last_updates = agent.updates();
    }
}

#[test]
fn refit_bookkeeping_is_monotone() {
    let mut cfg = small(EnvId::CliffWalking);
    cfg.refit = RefitTrigger::Adaptive(RefitConfig::default());
    cfg.context_k = 200;
    let mut agent = Agent::new(cfg).unwrap();
    let (mut refits, mut last) = (agent.refits(), agent.last_refit());
    let mut refit_steps = Vec::new();
    while !agent.is_done() {
        agent.step().unwrap();
        let now = agent.last_refit();
        assert!(now.0 >= last.0 && now.1 >= last.1);
        if agent.refits() == refits {
            assert_eq!(now, last, "bookkeeping changed without a refit");
        } else {
            assert_eq!(agent.refits(), refits + 1);
            assert_eq!(now.0, agent.t());
            refit_steps.push(now);
        }
        refits = agent.refits();
        last = now;
    }
    assert!(refit_steps.len() >= 2);
    for pair in refit_steps.windows(2) {
        // rho_stale = 0.25 of K = 200, and at least one new episode
        assert!(pair[1].0 - pair[0].0 >= 50);
        assert!(pair[1].1 > pair[0].1);
    }
}

#[test]
fn q_star_table_walks_frozen_lake() {
    let mut cfg = small(EnvId::FrozenLake4);
    cfg.gate.t0 = 200;
    cfg.sgd.epsilon.decay_steps = 100;
    cfg.sgd.epsilon.end = 0.0;
    let env = cfg.make_env(0).unwrap();
    let star = value_iteration(&env.model(cfg.gamma).unwrap(), cfg.gamma, 1e-12).unwrap();
    let out = Agent::with_regressor(cfg, Regressor::exact_table(star)).unwrap().run().unwrap();
    let icl: Vec<f64> = out.curve.iter().filter(|r| r.phase == Phase::Icl).map(|r| r.ret).collect();
    assert!(icl.len() > 10);
    assert!(icl.iter().all(|&r| r == 1.0), "{icl:?}");
}

#[test]
fn epsilon_keeps_decaying_through_the_switch() {
    let cfg = small(EnvId::CliffWalking);
    let schedule = cfg.sgd.epsilon;
    let mut agent = Agent::new(cfg).unwrap();
    while !agent.is_done() {
        assert_eq!(agent.epsilon(), schedule.at(agent.t()));
        agent.step().unwrap();
    }
}

#[test]
fn same_seed_same_bytes() {
    for env in [EnvId::CliffWalking, EnvId::FrozenLake4, EnvId::CartPole] {
        let mut cfg = small(env);
        cfg.seed = 11;
        let a = Agent::new(cfg.clone()).unwrap().run().unwrap();
        let b = Agent::new(cfg.clone()).unwrap().run().unwrap();
        assert_eq!(curve_to_string(&a.curve), curve_to_string(&b.curve), "{env:?}");
        cfg.seed = 12;
        let c = Agent::new(cfg).unwrap().run().unwrap();
        assert_ne!(curve_to_string(&a.curve), curve_to_string(&c.curve), "{env:?}");
    }
}

#[test]
fn invalid_configs_name_the_field() {
    let mut cfg = small(EnvId::CliffWalking);
    cfg.context_k = 0;
    let err = Agent::new(cfg).unwrap_err().to_string();
    assert!(err.contains("context_k"), "{err}");
    let mut cfg = small(EnvId::CliffWalking);
    cfg.gamma = 1.0;
    assert!(Agent::new(cfg).unwrap_err().to_string().contains("gamma"));
}
