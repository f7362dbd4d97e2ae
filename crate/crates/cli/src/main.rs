use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shower_sim::{analyze, run, run_summary, validate, CliError, RunOptions, Transport};

/// Scenario runner for the smart-shower simulation.
#[derive(Debug, Parser)]
#[command(name = "shower-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a scenario and write CSV, JSONL and alerts reports.
    Run(RunArgs),
    /// Label occupancy intervals in a distance CSV.
    Analyze {
        feed: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse and check a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Post to a running telemetry server at this URL.
    #[arg(long, conflicts_with = "embedded_server")]
    server: Option<String>,
    /// Start a telemetry server on a loopback port for the run.
    #[arg(long)]
    embedded_server: bool,
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Run(args) => {
            let transport = match (args.server, args.embedded_server) {
                (Some(url), _) => Transport::Remote(url),
                (None, true) => Transport::Embedded,
                (None, false) => Transport::Local,
            };
            let out = run(&RunOptions {
                scenario: args.scenario,
                config: args.config,
                seed: args.seed,
                out_dir: args.out,
                transport,
            })?;
            print!("{}", run_summary(&out));
        }
        Cmd::Analyze { feed, config } => {
            for line in analyze(&feed, config.as_deref())? {
                println!("{line}");
            }
        }
        Cmd::Validate { scenario } => {
            let n = validate(&scenario)?;
            println!("{}: ok, {n} events", scenario.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
