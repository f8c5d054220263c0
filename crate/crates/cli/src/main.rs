use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hrcplan::harness::{self, HarnessConfig, TrainTarget};
use hrcplan::Error;

#[derive(Parser)]
#[command(name = "hrcplan", version, about = "Human-aware motion planning toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Predictor,
    Planner,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the human dataset and the expert planning dataset.
    Generate(Common),
    /// Train the motion predictor and/or the graph planner.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        target: Target,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Static-scene planner comparison.
    Benchmark(Common),
    /// Dynamic replanning with a moving human.
    Simulate(Common),
    /// Monte Carlo sample-size sweep and error/uncertainty correlation.
    UncertaintyReport(Common),
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_BENCHMARK: u8 = 4;

fn load(c: &Common) -> Result<HarnessConfig, Error> {
    let mut cfg = HarnessConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Config(_) | Error::SchemaMismatch(_) => EXIT_CONFIG,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate(c) => {
            let rep = harness::cmd_generate(&load(&c)?)?;
            println!("{}", serde_json::to_string_pretty(&rep.manifest)?);
        }
        Command::Train { common, target, epochs } => {
            let cfg = load(&common)?;
            let targets: &[TrainTarget] = match target {
                Target::Predictor => &[TrainTarget::Predictor],
                Target::Planner => &[TrainTarget::Planner],
                Target::All => &[TrainTarget::Predictor, TrainTarget::Planner],
            };
            for &t in targets {
                let s = harness::cmd_train(&cfg, t, epochs)?;
                println!(
                    "{:?}: {} epochs, val loss {:.6} -> {:.6} (best epoch {})",
                    s.target, s.epochs, s.initial_val_loss, s.best_val_loss, s.best_epoch
                );
            }
        }
        Command::Benchmark(c) => {
            let rep = harness::cmd_benchmark(&load(&c)?)?;
            println!("{}", serde_json::to_string_pretty(&rep.summary)?);
            for (p, n) in &rep.invalid_paths {
                if *n > 0 {
                    eprintln!("{p}: {n} returned paths failed fine-step re-validation");
                }
            }
            if rep.exceeded_threshold {
                eprintln!("failure rate above threshold");
                return Ok(EXIT_BENCHMARK);
            }
        }
        Command::Simulate(c) => {
            let rep = harness::cmd_simulate(&load(&c)?)?;
            println!("{}", serde_json::to_string_pretty(&rep.summary)?);
        }
        Command::UncertaintyReport(c) => {
            let rep = harness::cmd_uncertainty_report(&load(&c)?)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
