//! `fmpair` — run ranked recommendation experiments from a config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fmpair_core::experiment::{run_experiment, run_timing_sweep, SweepParam};

#[derive(Parser)]
#[command(
    name = "fmpair",
    about = "Factorization machines with pairwise ranking loss: experiment runner",
    long_about = "Runs a full cross-validated experiment (parse, split, build features, train, \
                  evaluate) from one configuration file, or sweeps a hyper-parameter to measure \
                  epoch time. Outputs land in <config dir>/runs/<config stem>/ unless \
                  FMPAIR_OUTPUT_DIR is set."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Measure epoch time while varying one parameter.
    Sweep {
        /// Path to the base experiment config.
        config: PathBuf,
        /// Which parameter to vary: `k` (factors) or `z` (aux features per
        /// interaction).
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `5,10,20,40,80`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run_experiment(&config).map(|artifacts| {
            println!("{}", artifacts.report.render_text());
            println!("outputs: {}", artifacts.out_dir.display());
        }),
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let param = match SweepParam::from_cli(&param) {
                Some(p) => p,
                None => {
                    eprintln!("error: --param must be `k` or `z`, got `{param}`");
                    return ExitCode::from(2);
                }
            };
            run_timing_sweep(&config, param, &values).map(|(path, _)| {
                println!("timing written to {}", path.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
