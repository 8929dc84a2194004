use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use urnlab_cli::commands::{self, Outcome};

#[derive(Parser)]
#[command(
    name = "urnlab",
    version,
    about = "Monte Carlo laboratory for randomly reinforced urns and predictive sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: simulate replications, compute statistics, run the
    /// configured tests, and write artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification tests on a fresh run (--config) or on stored
    /// artifacts (--from).
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a predictive-sequence preset.
    Pd {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 1000)]
        replications: u64,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit plot-ready CSVs from a stored run.
    Report {
        /// Directory holding a run manifest.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the simulator against the exact small-horizon enumeration.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Horizons to check, comma-separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 6])]
        n: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
        /// Total-variation tolerance.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Outcome = match &cli.command {
        Command::Simulate {
            config,
            threads,
            out,
            seed,
        } => commands::simulate_cmd(config, *threads, out.as_deref(), *seed),
        Command::Verify {
            config,
            from,
            threads,
            out,
            seed,
        } => commands::verify_cmd(
            config.as_deref(),
            from.as_deref(),
            *threads,
            out.as_deref(),
            *seed,
        ),
        Command::Pd {
            preset,
            replications,
            horizon,
            seed,
            threads,
            out,
        } => commands::pd_cmd(preset, *replications, *horizon, *seed, *threads, out.as_deref()),
        Command::Report { from, out } => commands::report_cmd(from, out.as_deref()),
        Command::Oracle {
            config,
            n,
            replications,
            tolerance,
            seed,
            threads,
        } => commands::oracle_cmd(config, n, *replications, *tolerance, *seed, *threads),
    };
    for message in &outcome.messages {
        if outcome.exit_code == commands::EXIT_CONFIG {
            eprintln!("{message}");
        } else {
            println!("{message}");
        }
    }
    ExitCode::from(outcome.exit_code)
}
