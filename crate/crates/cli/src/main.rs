use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clockclosure_cli::{commands, exit, locate_config, run_scenario, CliError, RunOptions, ScenarioConfig};

#[derive(Parser)]
#[command(name = "clockclosure", version, about = "Closure tests on connected atomic clock transitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json and CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's `output`, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the closure cycles of a level table.
    Closures {
        #[arg(long)]
        levels: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_cycle: usize,
    },
    /// Overlapping Allan deviation of a frequency-series CSV.
    Allan {
        #[arg(long)]
        series: PathBuf,
        /// Comma-separated averaging times in seconds.
        #[arg(long)]
        taus: String,
        /// Restrict to one transition of a multi-transition file.
        #[arg(long)]
        transition: Option<String>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run { config, out: out_dir, seed } => {
            let loaded = ScenarioConfig::load(&locate_config(&config)?)?;
            let outcome = run_scenario(&loaded, &RunOptions { out_dir, seed })?;
            if let Some(c) = &outcome.report.closure {
                let _ = writeln!(
                    out,
                    "{}: Δ = {:.6e} Hz, σ_Δ = {:.6e} Hz, |Δ| ≤ {:.6e} Hz (k = {})",
                    outcome.report.scenario.name, c.delta_hz, c.sigma_hz, c.bound_hz, c.k
                );
            }
            for f in &outcome.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            Ok(exit::OK)
        }
        Command::Closures { levels, max_cycle } => {
            commands::closures(&levels, max_cycle, &mut out)?;
            Ok(exit::OK)
        }
        Command::Allan { series, taus, transition } => {
            let taus = commands::parse_taus(&taus)?;
            commands::allan(&series, &taus, transition.as_deref(), &mut out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
