//! Command-line frontend: describe groups, run the invariant suites,
//! reduce, solve, verify the catalogued exact solutions, and sweep
//! parameter grids, emitting CSV tables plus a manifest per run.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ncreduce",
    version,
    about = "Invariant geometry and reduced models on low-dimensional Lie groups"
)]
struct Cli {
    /// Run-configuration file (key-value blocks; see README).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Seed for all randomized identity tests and samplers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for data artifacts.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Multiplies every suite tolerance (values > 1 loosen).
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dimension, index, Casimirs, frames and curvature for a group.
    Describe {
        /// Catalog name (e2, exp-solv-4) or path to a definition file.
        group: String,
    },
    /// Run the invariant suites (commutators, Casimirs, curvature,
    /// transport, factorization); nonzero exit on failure.
    Check {
        group: Option<String>,
        /// Negative control: corrupt the kernel phase and expect the
        /// transport suite to fail with a witness.
        #[arg(long)]
        corrupt_phase: bool,
    },
    /// Emit the reduced-equation coefficients for a configuration.
    Reduce,
    /// Evolve or integrate the reduced model of a configuration.
    Solve,
    /// Verify the catalogued exact solutions and the reference-formula
    /// registry; emit residual tables.
    Verify { group: Option<String> },
    /// Fan out a parameter grid, one record per run.
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let global = commands::Global {
        config_path: cli.config,
        seed: cli.seed,
        out: cli.out,
        tolerance_scale: cli.tolerance_scale,
    };
    let result = match cli.command {
        Command::Describe { group } => commands::describe(&global, &group),
        Command::Check {
            group,
            corrupt_phase,
        } => commands::check(&global, group.as_deref(), corrupt_phase),
        Command::Reduce => commands::reduce(&global),
        Command::Solve => commands::solve(&global),
        Command::Verify { group } => commands::verify(&global, group.as_deref()),
        Command::Sweep => commands::sweep(&global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Suite(msg)) => {
            eprintln!("suite failure: {msg}");
            ExitCode::from(1)
        }
        Err(commands::CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
