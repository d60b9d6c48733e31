use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cosserat_cli::runner::{output_directory, run, RunOptions};
use cosserat_cli::scenario::Scenario;
use cosserat_cli::CliError;

#[derive(Parser)]
#[command(name = "cosserat", version, about = "Cosserat rod scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario and run its analysis.
    Run {
        scenario: PathBuf,
        /// Output directory (overrides the scenario's setting).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only parse and validate the scenario.
        #[arg(long)]
        check: bool,
        /// Keep every N-th time step in trajectory.csv.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        decimate: u64,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let Command::Run {
        scenario,
        out,
        check,
        decimate,
    } = cli.command;
    let parsed = Scenario::from_path(&scenario)?;
    let setup = parsed.validate()?;
    if check {
        println!("{}: ok", scenario.display());
        return Ok(());
    }
    let options = RunOptions {
        out_dir: output_directory(
            &scenario,
            parsed.output.as_ref().map(|o| o.directory.as_path()),
            out.as_deref(),
        ),
        decimate: decimate as usize,
    };
    let summary = run(&setup, &options)?;
    for note in &summary.notes {
        println!("{note}");
    }
    for file in &summary.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
