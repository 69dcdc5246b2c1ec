use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ibmg::{run_experiment, threads_from_env, write_snapshot, Config, RunOptions, RunRecord, Snapshot};

#[derive(Parser)]
#[command(name = "ibmg", version, about = "Immersed-boundary multigrid experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every point of a sweep and write summary.csv and residuals.csv.
    Run {
        config: PathBuf,
        /// Sweep points to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default config.
    PrintConfig,
    /// Run the first point of a config and write velocity, pressure and node snapshots.
    Snapshot {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "snapshot")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = threads_from_env();
    match cli.command {
        Command::Run { config, jobs, out } => {
            let mut cfg = Config::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let records = run_experiment(&cfg, RunOptions { jobs, threads })?;
            for r in &records {
                println!("{}", r.summary_line(cfg.record_timing));
            }
        }
        Command::PrintConfig => print!("{}", Config::default().to_toml()),
        Command::Snapshot { config, out } => {
            let cfg = Config::load(&config)?;
            let point = cfg.points().into_iter().next().context("config has no run points")?;
            let step = || ibmg::run::step_point(&point);
            let outcome = match threads {
                Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(step),
                None => step(),
            }?;
            write_snapshot(&out, &Snapshot::new(&outcome.solution, &outcome.positions))?;
            println!("{}", RunRecord::from_outcome(&point, &outcome).summary_line(cfg.record_timing));
        }
    }
    Ok(())
}
