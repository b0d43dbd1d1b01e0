use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use classicality::commands::{execute, report_error, Command, RunOptions};
use classicality::config::{load_config, parse_config_with_overrides};

#[derive(Parser)]
#[command(name = "classicality", version, about = "Classicality and consistency checks for quantum states")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config leaf, e.g. `--set quantum.axes.0.width=0.3`.
    #[arg(long = "set", value_name = "K=V", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Consistency criteria at t = 0.
    Check,
    /// Largest classicality order and largest p0.
    Classicality,
    /// Evolve and verify consistency at every sample.
    Evolve,
    /// Sweep one config leaf and report a row per point.
    Scan,
    /// Oracle cross-checks.
    Selftest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Check => Command::Check,
            Cmd::Classicality => Command::Classicality,
            Cmd::Evolve => Command::Evolve,
            Cmd::Scan => Command::Scan,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let parsed = match &cli.config {
        Some(path) => load_config(path, &cli.overrides),
        None => parse_config_with_overrides("{}", &cli.overrides),
    };
    let outcome = match parsed {
        Ok(cfg) => {
            let base_dir = cli
                .config
                .as_ref()
                .and_then(|p| p.parent())
                .map(PathBuf::from)
                .unwrap_or_default();
            let options = RunOptions { out_dir: cli.out.clone(), seed: cli.seed, workers: cli.workers, base_dir };
            execute(command, &cfg, &options)
        }
        Err(e) => report_error(command, &e, cli.out.as_deref().unwrap_or("out".as_ref())),
    };
    if outcome.exit_code == 2 {
        eprintln!("{}", outcome.summary);
    } else {
        print!("{}", outcome.summary);
    }
    ExitCode::from(outcome.exit_code as u8)
}
