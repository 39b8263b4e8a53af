use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use psdo_recovery::commands::{run_command, Command, RunOptions};
use psdo_recovery::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Recover,
    NoiseStats,
    VarianceScaling,
    Nonconvergence,
    Rate,
    Asymptotics,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Recover => Command::Recover,
            Cmd::NoiseStats => Command::NoiseStats,
            Cmd::VarianceScaling => Command::VarianceScaling,
            Cmd::Nonconvergence => Command::Nonconvergence,
            Cmd::Rate => Command::Rate,
            Cmd::Asymptotics => Command::Asymptotics,
        }
    }
}

/// Recover symbol expansions from simulated noisy wave-packet measurements.
#[derive(Debug, Parser)]
#[command(name = "psdo", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config; default `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo trials (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Record wall time in the CSV rows.
    #[arg(long)]
    timing: bool,
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = ExperimentConfig::from_path(&cli.config).and_then(|cfg| {
        let options = RunOptions {
            seed: cli.seed,
            trials: cli.trials,
            out: cli.out.clone(),
            workers: cli.workers,
            timing: cli.timing,
        };
        run_command(cli.command.into(), &cfg, &options)
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                for l in &outcome.lines {
                    println!("{l}");
                }
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
