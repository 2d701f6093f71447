use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpi_core::config::{key_reference, load_config};
use fpi_core::studies::run_study;
use fpi_core::Error;

#[derive(Parser)]
#[command(name = "fpi", version, about = "Cut finite element studies of free flow coupled to a poroelastic body")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a config file.
    Run {
        config: PathBuf,
        /// Output directory, overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print one line per run or time step.
        #[arg(long)]
        verbose: bool,
    },
    /// List the accepted config keys.
    Keys,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Keys => {
            print!("{}", key_reference());
            ExitCode::SUCCESS
        }
        Command::Run { config, out, verbose } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            let mut progress = |msg: &str| {
                if verbose {
                    eprintln!("{msg}");
                }
            };
            match run_study(&cfg, &mut progress) {
                Ok(o) => {
                    println!("{}: {} of {} runs ok, table written to {}", cfg.study.name(), o.total - o.failed, o.total, o.csv_path.display());
                    if o.failed == o.total && o.total > 0 {
                        ExitCode::from(EXIT_SOLVER)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(Error::Io(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_SOLVER)
                }
            }
        }
    }
}
