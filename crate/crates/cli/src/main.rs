use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcollide_cli::{run, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "qcollide", about = "Collisional-model and Metropolis thermalization runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Also write SVG plots next to the CSV files.
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Run the built-in property checks.
    Check,
    /// Print the version.
    Version,
}

/// Honors QCOLLIDE_THREADS by sizing the global worker pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QCOLLIDE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("QCOLLIDE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn run_config(path: PathBuf, plot: bool, seed: Option<u64>, runs: Option<usize>) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&path)?;
    config.override_mc(seed, runs)?;
    let report = run::execute(&config, plot)?;
    let width = report.summary.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    for (key, value) in &report.summary {
        println!("{key:<width$}  {value}");
    }
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn check() -> Result<bool, CliError> {
    let results = qcollide::checks::run_all()?;
    let mut ok = true;
    for r in &results {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        ok &= r.passed();
        println!("{status}  {:<52} {:.3e} (tol {:.0e})", r.name, r.value, r.tolerance);
    }
    println!("{} of {} checks passed", results.iter().filter(|r| r.passed()).count(), results.len());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, plot, seed, runs } => run_config(config, plot, seed, runs).map(|()| true),
        Command::Check => check(),
        Command::Version => {
            println!("qcollide {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
