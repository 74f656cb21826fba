//! `lmsz`: scenario-driven runs of the two-qubit LMSZ simulator.

mod commands;
mod error;
mod scenario;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outcome, Overrides, SectorArg};
use error::{CliError, CliResult};
use table::Format;

#[derive(Debug, Parser)]
#[command(name = "lmsz", version, about = "Two exchange-coupled qubits under LMSZ ramps")]
struct Cli {
    /// Integrator tolerance; overrides the scenario file.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Output window as tau_i:tau_f:points; overrides the scenario file.
    #[arg(long, global = true)]
    window: Option<String>,
    /// Base seed for noise ensembles; overrides the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Run the independent cross-check where the command has one.
    #[arg(long, global = true)]
    verify: bool,
    /// Output file; standard output when absent.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time series of a closed-system scenario.
    Propagate { scenario: PathBuf },
    /// Asymptotic probability and concurrence against beta.
    SweepBeta {
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value = "plus")]
        sector: SectorArg,
    },
    /// Couplings from measured sector probabilities (CSV or JSON records).
    Estimate { measurements: PathBuf },
    /// Monte Carlo ensemble for a noisy_ramp scenario.
    NoiseMc {
        scenario: PathBuf,
        /// Overrides the realisation count of the scenario.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Non-Hermitian decay run for a scenario with a [decay] section.
    Decay { scenario: PathBuf },
    /// Closed-form block solution against integration.
    ExactCheck {
        /// Ramp scenario to check; the built-in grid when absent.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let overrides = Overrides {
        tolerance: cli.tolerance,
        window: cli.window.as_deref().map(scenario::parse_window_flag).transpose()?,
        seed: cli.seed,
        verify: cli.verify,
    };
    let Outcome { table, failure } = match &cli.command {
        Command::Propagate { scenario } => commands::propagate(scenario, &overrides)?,
        Command::SweepBeta {
            min,
            max,
            steps,
            sector,
        } => commands::sweep_beta(*min, *max, *steps, *sector, &overrides)?,
        Command::Estimate { measurements } => {
            let o = commands::estimate(measurements)?;
            eprintln!("note: {}", lmsz::estimation::SIGN_AMBIGUITY_NOTE);
            o
        }
        Command::NoiseMc {
            scenario,
            realizations,
        } => commands::noise_mc(scenario, *realizations, &overrides)?,
        Command::Decay { scenario } => commands::decay(scenario, &overrides)?,
        Command::ExactCheck {
            scenario,
            threshold,
        } => commands::exact_check(scenario.as_deref(), *threshold, &overrides)?,
    };
    match &cli.out {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            table.write(cli.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            table.write(cli.format, stdout.lock())?;
        }
    }
    failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmsz: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
