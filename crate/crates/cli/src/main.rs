//! `areatilt`: run, describe and list experiments.
//!
//! Exit status: 0 when every declared tolerance holds, 1 when at least one
//! fails, 2 on any error (bad config, I/O, numerical failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use areatilt::experiments::{self, RunConfig};

const EXIT_TOLERANCE: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "areatilt", version, about = "Area-tilted random walks: spectra, bridges and scaling-limit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        /// Config file.
        #[arg(required_unless_present = "list")]
        config: Option<PathBuf>,
        /// Print the experiment catalogue instead of running.
        #[arg(long)]
        list: bool,
    },
    /// Explain what an experiment tests and its pass criteria.
    Describe { tag: String },
    /// Print the experiment catalogue.
    List,
}

fn run(config_path: &PathBuf) -> Result<bool, areatilt::Error> {
    let config = RunConfig::load(config_path)?;
    let outcome = experiments::run_experiment(&config)?;
    let dir = experiments::write_outputs(&config, &outcome, &experiments::output_root())?;
    let report = &outcome.report;
    println!("{} (seed {})", report.tag, config.seed);
    print!("{}", report.summary());
    println!("outputs: {}", dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List | Command::Run { list: true, .. } => {
            print!("{}", experiments::listing());
            ExitCode::SUCCESS
        }
        Command::Describe { tag } => match experiments::describe(&tag) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        },
        Command::Run { config, .. } => {
            let path = config.expect("clap enforces a config path");
            match run(&path) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => {
                    eprintln!("tolerance check failed");
                    ExitCode::from(EXIT_TOLERANCE)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_ERROR)
                }
            }
        }
    }
}
