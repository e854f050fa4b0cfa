use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

use commands::Failure;

/// Optimal supervisory control of probabilistic finite-state automata
/// under partial observation.
#[derive(Debug, Parser)]
#[command(name = "pfsa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file; prints one violation per line.
    Validate { model: PathBuf },

    /// Compute the optimal disabling set and its measure.
    Synthesize {
        model: PathBuf,
        /// Evaluate at this termination probability instead of the critical one.
        #[arg(long)]
        theta_override: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },

    /// Monte-Carlo simulation of the plant under one or all policies.
    Simulate {
        model: PathBuf,
        /// null, perfect, partial, perfect_blind or all.
        #[arg(long, default_value = "all")]
        policy: String,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Initial state name. Defaults to the first declared state.
        #[arg(long)]
        initial_state: Option<String>,
        /// Decision precision of the partial-observation controller.
        #[arg(long, default_value_t = pfsa::control::DEFAULT_LAMBDA)]
        lambda: f64,
        /// Max-norm tolerance for counting distinct controller estimates.
        #[arg(long, default_value_t = pfsa::observe::DEFAULT_DEDUP_TOL)]
        dedup_tol: f64,
        /// Also write every run's per-tick records.
        #[arg(long)]
        traces: bool,
    },

    /// Enumerate entangled states reachable from the pure states.
    Entangled {
        model: PathBuf,
        #[arg(long, default_value_t = pfsa::observe::DEFAULT_DEDUP_TOL)]
        tol: f64,
        #[arg(long, default_value_t = pfsa::observe::DEFAULT_STATE_CAP)]
        cap: usize,
        /// Termination probability; defaults to the critical one.
        #[arg(long)]
        theta: Option<f64>,
        /// Also follow firings of disabled controllable events.
        #[arg(long)]
        with_disabled: bool,
        /// Print every state vector.
        #[arg(long)]
        show: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Validate { model } => commands::validate(&model, &mut stdout),
        Command::Synthesize { model, theta_override, format } => {
            commands::synthesize(&model, theta_override, format, &mut stdout)
        }
        Command::Simulate { model, policy, steps, runs, seed, out, initial_state, lambda, dedup_tol, traces } => {
            let opts =
                commands::SimulateOptions { policy, steps, runs, seed, out, initial_state, lambda, dedup_tol, traces };
            commands::simulate(&model, &opts, &mut stdout)
        }
        Command::Entangled { model, tol, cap, theta, with_disabled, show } => {
            let opts = commands::EntangledOptions { tol, cap, theta, with_disabled, show };
            commands::entangled(&model, &opts, &mut stdout)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violations(lines)) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::from(1)
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
