use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cosserat_cli::config;
use cosserat_cli::error::CliError;
use cosserat_cli::{plots, run};

#[derive(Parser)]
#[command(name = "cosserat", version, about = "Simulate inflatable soft rods from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a bundled scenario by name.
    Simulate {
        config: String,
        /// Output directory; defaults to the scenario's own setting or runs/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only check the scenario and report every problem found.
        #[arg(long)]
        validate_only: bool,
        /// Worker threads for parameter sweeps.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write plotting scripts for a finished run.
    Plots { run_dir: PathBuf },
}

fn simulate(config: &str, out: Option<PathBuf>, validate_only: bool, threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let source = config::load_source(config)?;
    let scenario = run::load(&source)?;
    if validate_only {
        println!("{}: valid", source.origin);
        return Ok(());
    }
    let outcome = run::run(&scenario, &source, out.as_deref())?;
    println!("{}", outcome.directory.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            validate_only,
            threads,
        } => simulate(&config, out, validate_only, threads),
        Command::Plots { run_dir } => plots::emit_plots(&run_dir).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
