use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tabql::env::{EnvId, EnvOptions, Environment, FeatureRow};
use tabql::harness::{self, ExperimentConfig, GeneralizationConfig, SweepParam};
use tabql::regressor::{BridgeClient, RowSet};
use tabql::theory::value_iteration;
use tabql::{format_float, verify, Error};

#[derive(Parser)]
#[command(name = "tabql", version, about = "TabQL experiments, baselines and theory checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment over all configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Extra key=value lines applied after the file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (default: the config's `output`, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep T0 or the context size.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',')]
        values: Vec<u64>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the theory property suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print Q* of a discrete environment under raw rewards.
    Oracle {
        #[arg(long)]
        env: EnvId,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        slippery: bool,
    },
    /// Render learning-curve CSVs as mean +- std bands.
    Plot {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "learning curves")]
        title: String,
    },
    /// Ping a regressor bridge and check it echoes a context.
    BridgeCheck {
        #[arg(long)]
        endpoint: String,
    },
    /// Cross-seed generalization on Taxi.
    Generalize {
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, value_delimiter = ',', default_value = "5,40")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn is_validation(e: &Error) -> bool {
    use tabql::env::EnvError;
    matches!(e, Error::Config(_) | Error::Env(EnvError::UnknownEnv(_) | EnvError::NotEnumerable(_)))
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn label_for(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) if stem == "curve" => dir.to_string_lossy().into_owned(),
        _ => stem,
    }
}

fn run(cmd: Command) -> Result<bool, Error> {
    match cmd {
        Command::Run { config, overrides, out } => {
            let cfg = ExperimentConfig::from_file(&config, &overrides)?;
            let output = harness::run_experiment(&cfg)?;
            let dir = out_dir(&cfg, out);
            for path in output.write(&cfg, &dir)? {
                println!("wrote {}", path.display());
            }
            for (seed, run) in &output.runs {
                println!(
                    "seed {seed}: {} episodes, final-50 mean {}",
                    run.curve.len(),
                    format_float(harness::tail_mean(&run.curve, 50))
                );
            }
        }
        Command::Sweep { param, values, config, overrides, out } => {
            let cfg = ExperimentConfig::from_file(&config, &overrides)?;
            let dir = out_dir(&cfg, out);
            for (value, output) in harness::sweep(&cfg, param, &values)? {
                let point = harness::sweep_point(&cfg, param, value);
                output.write(&point, &dir.join(format!("{param}_{value}")))?;
                println!("{param}={value}: final-50 mean {}", format_float(harness::final_mean(&output, 50)));
            }
        }
        Command::Verify { seed } => {
            let results = verify::run_all(seed);
            print!("{}", verify::format_table(&results));
            return Ok(results.iter().all(|r| r.passed));
        }
        Command::Oracle { env, gamma, slippery } => {
            let e = Environment::new(env, EnvOptions { slippery, horizon: None }, 0)?;
            let mdp = e.model(gamma)?.raw();
            let q = value_iteration(&mdp, gamma, 1e-10)?;
            let header: Vec<String> = (0..q.n_actions()).map(|a| format!("a{a}")).collect();
            println!("state,{}", header.join(","));
            for s in 0..q.n_states() {
                let row: Vec<String> = q.row(s).iter().map(|&v| format_float(v)).collect();
                println!("{s},{}", row.join(","));
            }
        }
        Command::Plot { inputs, out, title } => {
            let mut all = Vec::new();
            for path in &inputs {
                all.push(harness::series(label_for(path), &harness::read_curve(path)?));
            }
            harness::render_svg(&all, &title, &out)?;
            println!("wrote {}", out.display());
        }
        Command::BridgeCheck { endpoint } => {
            let mut client = BridgeClient::new(&endpoint)?;
            client.ping()?;
            println!("PONG from {endpoint}");
            let rows = vec![
                FeatureRow::labeled(vec![0.0, 0.0], 1.5),
                FeatureRow::labeled(vec![1.0, 0.0], -2.0),
                FeatureRow::labeled(vec![0.0, 3.0], 0.25),
            ];
            let queries: Vec<FeatureRow> = rows.iter().map(|r| FeatureRow::query(r.features.clone())).collect();
            let set = RowSet::new(rows.clone())?;
            let got = client.predict(&set, &queries)?;
            let echoed = got.iter().zip(&rows).all(|(g, r)| Some(*g) == r.label);
            println!("echo context: {}", if echoed { "ok" } else { "mismatch" });
            return Ok(echoed);
        }
        Command::Generalize { repetitions, counts, n_test, seed } => {
            let cfg = GeneralizationConfig {
                repetitions,
                n_train: counts.iter().copied().max().unwrap_or(0),
                context_counts: counts,
                n_test,
                seed,
                ..GeneralizationConfig::taxi()
            };
            let rows = harness::cross_seed_generalization(&cfg)?;
            println!("repetition,n_context,test_return,test_normalized,seen_normalized");
            for r in &rows {
                println!(
                    "{},{},{},{},{}",
                    r.repetition,
                    r.n_context,
                    format_float(r.test_return),
                    format_float(r.test_normalized),
                    format_float(r.seen_normalized)
                );
            }
            for (n, mean) in harness::summarize(&cfg, &rows) {
                eprintln!("{n} context conditions: mean held-out normalized return {}", format_float(mean));
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}
