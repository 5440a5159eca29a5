//! Cross-seed generalization on Taxi: tabular agents trained on a pool of
//! start conditions fill one context, which then drives greedy play from
//! start conditions no agent has seen.

use tabql::harness::{cross_seed_generalization, summarize, GeneralizationConfig};

fn main() -> tabql::Result<()> {
    let cfg = GeneralizationConfig { repetitions: 2, n_test: 30, ..GeneralizationConfig::taxi() };
    let rows = cross_seed_generalization(&cfg)?;
    for r in &rows {
        println!(
            "rep {} with {:>2} conditions: held-out {:.3} (raw {:>7.1}), seen {:.3}",
            r.repetition, r.n_context, r.test_normalized, r.test_return, r.seen_normalized
        );
    }
    for (n, mean) in summarize(&cfg, &rows) {
        println!("{n:>2} conditions in context: mean held-out normalized return {mean:.3}");
    }
    Ok(())
}
