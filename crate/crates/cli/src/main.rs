use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helical_cli::{commands, with_workers, LoadedConfig, RunOptions};

#[derive(Parser)]
#[command(name = "helical", version, about = "Enhanced dissipation experiments with planar helical flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Psi over a list of viscosities and fit its power law.
    SweepPsi(Common),
    /// Run the configured PDE and record its diagnostic series.
    Simulate(Common),
    /// Evaluate the bootstrap ledger on a stored trajectory.
    Check(Common),
    /// Sample the non-degeneracy condition on the shear profile.
    CheckAssumption(Common),
    /// Fit an exponential decay rate to a recorded series.
    FitRate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "HELICAL_NUM_WORKERS")]
    workers: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (run, common): (fn(&LoadedConfig, &RunOptions) -> helical::Result<_>, Common) = match cli.command {
        Command::SweepPsi(c) => (commands::sweep_psi, c),
        Command::Simulate(c) => (commands::simulate, c),
        Command::Check(c) => (commands::check, c),
        Command::CheckAssumption(c) => (commands::check_assumption_cmd, c),
        Command::FitRate(c) => (commands::fit_rate, c),
    };
    let opts = RunOptions { out: common.out.clone(), seed: common.seed, plot: common.plot };
    let result = LoadedConfig::from_path(&common.config)
        .and_then(|cfg| with_workers(common.workers, || run(&cfg, &opts)).and_then(|r| r));
    match result {
        Ok(m) => {
            println!("{}: {} ({:.2} s), outputs in {}", m.command, m.status, m.wall_clock_seconds, opts.out.display());
            for w in &m.warnings {
                println!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
