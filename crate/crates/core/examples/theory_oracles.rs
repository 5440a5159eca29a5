//! Exact dynamic-programming oracles on an enumerated model: value
//! iteration and the Bellman operator's contraction on CliffWalking, then
//! the closed-form bounds for a model of its size.

use tabql::env::{enumerate_model, EnumerateOptions, EnvId};
use tabql::theory::{
    asymptotic_suboptimality, bellman_apply, eps_stat_bound, policy_q, theorem2_samples, value_iteration, QTable,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gamma = 0.99;
    // raw rewards: the normalized model's shifted rewards change the optimal path
    let mdp = enumerate_model(EnvId::CliffWalking, EnumerateOptions { gamma, slippery: false })?.raw();
    let (ns, na) = (mdp.n_states, mdp.n_actions);

    let q_star = value_iteration(&mdp, gamma, 1e-10)?;
    println!("V*(start) = {:.4}, the discounted value of the 13-step path", q_star.max(36));
    let greedy: Vec<usize> = (0..ns).map(|s| q_star.greedy(s)).collect();
    let q_pi = policy_q(&mdp, &greedy, gamma, 1e-10)?;
    println!("greedy policy of Q* evaluates to V(start) = {:.4}", q_pi.max(36));

    // ||TQ - TQ*|| <= gamma ||Q - Q*|| for any Q
    let q = QTable::zeros(ns, na);
    let before = q.sup_dist(&q_star);
    let after = bellman_apply(&q, &mdp, gamma)?.sup_dist(&bellman_apply(&q_star, &mdp, gamma)?);
    println!("contraction: {after:.4} <= {gamma} * {before:.4}");

    let delta = 0.05;
    for m in [10.0, 100.0, 1_000.0] {
        println!(
            "m={m:>5}: eps_stat <= {:>9.3}   asymptotic gap <= {:>12.1}",
            eps_stat_bound(gamma, ns, na, delta, m, 0.0)?,
            asymptotic_suboptimality(0.0, 0.0, gamma, ns, na, delta, m)?
        );
    }
    println!("samples for eps=1 at gamma=0.9: {:.3e}", theorem2_samples(0.9, 1.0, ns, na, delta, 1.0)?);
    Ok(())
}
