//! Key=value experiment configs with command-line style overrides. The
//! resolved form written next to every run parses back to the same config.

use tabql::harness::ExperimentConfig;

const TEXT: &str = "\
# a short FrozenLake experiment
env = frozen
seeds = 0,1,2
total_steps = 8000
context_k = 500
";

fn main() -> tabql::Result<()> {
    let overrides = vec!["t0=2000".to_string(), "regressor=kernel".to_string()];
    let cfg = ExperimentConfig::parse(TEXT, &overrides)?;
    let resolved = cfg.resolved();
    print!("{resolved}");
    assert_eq!(ExperimentConfig::parse(&resolved, &[])?, cfg);

    match ExperimentConfig::parse("env=frozen\ncontext_k=0\n", &[]) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
