use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfgl_cli::config::{PredictorKind, RuleKind};
use mfgl_cli::{run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "mfgl", version, about = "Mean field games with learning: solvers and experiments")]
struct Cli {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Recorded in the manifest; the solvers run sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Stationary equilibrium.
    Stationary,
    /// Perfect-foresight transition from a poorer initial distribution.
    Transition,
    /// Temporary equilibrium under a forecasting rule.
    TemporaryEq {
        #[arg(long, value_enum)]
        predictor: Option<PredictorKind>,
        #[arg(long, value_enum)]
        rule: Option<RuleKind>,
        /// Comma-separated initial beliefs.
        #[arg(long, value_delimiter = ',')]
        theta0: Option<Vec<f64>>,
        /// Number of steps.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Learning simulation with aggregate shocks.
    CommonNoise {
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gain: Option<f64>,
    },
    /// Adaptive learning in the discrete model.
    DiscreteLearn,
    /// Rational-expectations values on the population simplex.
    DiscreteMaster,
    /// Markov reward process values by enumeration, oracle and sampling.
    Mrp,
    /// The acceptance battery.
    Suite,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.threads == 0 {
        return Err(CliError::Config("invalid `--threads`: must be >= 1".into()));
    }
    let command = match cli.command {
        Sub::Stationary => Command::Stationary,
        Sub::Transition => Command::Transition,
        Sub::TemporaryEq {
            predictor,
            rule,
            theta0,
            horizon,
        } => {
            let t = &mut config.temporary;
            if let Some(p) = predictor {
                t.predictor = p;
            }
            if let Some(r) = rule {
                t.rule = r;
            }
            if let Some(th) = theta0 {
                t.theta0 = th;
            }
            if let Some(h) = horizon {
                t.steps = h;
            }
            Command::TemporaryEq
        }
        Sub::CommonNoise { beta, gain } => {
            if let Some(b) = beta {
                config.common_noise.beta = b;
            }
            if let Some(g) = gain {
                config.common_noise.gain = g;
            }
            Command::CommonNoise
        }
        Sub::DiscreteLearn => Command::DiscreteLearn,
        Sub::DiscreteMaster => Command::DiscreteMaster,
        Sub::Mrp => Command::Mrp,
        Sub::Suite => Command::Suite,
    };
    config.validate()?;
    let out = cli.out_dir.join(command.name());
    let summary = run(command, &config, &out, cli.threads)?;
    if command == Command::Suite {
        for c in summary["criteria"].as_array().into_iter().flatten() {
            println!("criterion {}: {}", c["id"], if c["passed"] == true { "PASS" } else { "FAIL" });
        }
    }
    println!("{}", out.display());
    Ok(())
}
