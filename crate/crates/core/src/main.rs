use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lvcomp::commands::{cmd_equilibria, cmd_pde, cmd_scan, cmd_separatrix, cmd_simulate, CommandError, RunContext};
use lvcomp::config::ExperimentConfig;
use lvcomp::report::ResultBundle;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(
    name = "lvcomp",
    version,
    about = "Competition models with finite-time extinction: equilibria, trajectories, separatrices, reaction-diffusion runs and parameter scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List equilibria with Jacobian, trace, determinant and stability.
    Equilibria(Common),
    /// Integrate one ODE trajectory.
    Simulate(Common),
    /// Trace the stable manifold of each saddle, plus the extinction threshold curve.
    Separatrix(Common),
    /// Run the reaction-diffusion system and write snapshots.
    Pde(Common),
    /// Sweep diffusivities or the c1 window.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the file, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for scans.
    #[arg(long)]
    workers: Option<usize>,
    /// Scan resolution per axis, c1 samples, or threshold samples.
    #[arg(long)]
    resolution: Option<usize>,
    /// Override one key, e.g. `--set params.p=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

type Runner = fn(&ExperimentConfig, &RunContext) -> Result<ResultBundle, CommandError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, Runner) = match &cli.command {
        Command::Equilibria(c) => (c, cmd_equilibria),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Separatrix(c) => (c, cmd_separatrix),
        Command::Pde(c) => (c, cmd_pde),
        Command::Scan(c) => (c, cmd_scan),
    };

    let config = match ExperimentConfig::load(&common.config, &common.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut ctx = RunContext { resolution: common.resolution, ..RunContext::default() };
    if let Some(w) = common.workers {
        ctx.workers = w.max(1);
    }
    let bundle = match run(&config, &ctx) {
        Ok(b) => b,
        Err(CommandError::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e @ CommandError::Numerical(_)) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };

    let out = common
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match bundle.write_to(&out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot write to {}: {e}", out.display());
            ExitCode::from(EXIT_IO)
        }
    }
}
