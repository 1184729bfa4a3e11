use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levy_ep_cli::{list_registries, load_config, run_experiment, CliError, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "levy-ep", version, about = "Euler-Poisson experiments for Lévy-driven SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strong-error rate ladders against coupled references.
    Converge(RunArgs),
    /// Largest-gap and grid-deviation statistics.
    Gridstats(RunArgs),
    /// Characteristic-function check of the resolvent sampler.
    ValidateSampler(RunArgs),
    /// Rothe scheme against Monte Carlo.
    Pide(RunArgs),
    /// Dump scheme trajectories.
    Simulate(RunArgs),
    /// List models, coefficients, schemes and experiments.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Config file or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "LEVY_EP_WORKERS")]
    workers: Option<usize>,
    /// Output directory (overrides run.out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn prepare(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = load_config(&args.config)?;
    if config.kind != kind {
        return Err(CliError::Usage {
            field: "experiment".into(),
            message: format!("config is for `{}`, not `{kind}`", config.kind),
        });
    }
    if let Some(seed) = args.seed {
        config = config.with_seed(seed);
    }
    if let Some(w) = args.workers {
        config = config.with_workers(w);
    }
    if let Some(out) = &args.out {
        config = config.with_out(out);
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::List => {
            print!("{}", list_registries());
            return ExitCode::SUCCESS;
        }
        Command::Converge(a) => (ExperimentKind::Converge, a),
        Command::Gridstats(a) => (ExperimentKind::Gridstats, a),
        Command::ValidateSampler(a) => (ExperimentKind::ValidateSampler, a),
        Command::Pide(a) => (ExperimentKind::Pide, a),
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
    };
    let outcome = prepare(kind, args).and_then(|c| run_experiment(&c));
    match outcome {
        Ok(o) => {
            for c in &o.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for p in &o.outputs {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", o.manifest.display());
            if o.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("levy-ep: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
