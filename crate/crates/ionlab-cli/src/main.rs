//! `ionlab` — trapped-ion experiment simulator CLI.
//!
//! Subcommands map to the experiments of the underlying library: `modes`
//! (crystal normal modes and sideband lines), `run` (pulse-sequence
//! execution with shot sampling), `fit` (turn scan CSVs into physical
//! quantities), and `gatespeed` (blue-sideband π-pulse speed limit).
//!
//! Exit codes: 0 success, 1 usage/parse, 2 physics/solver, 3 fit failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{parse_freq_arg, parse_time_arg, GateSpeedArgs, RunArgs};
use ionlab::error::Error as IonError;

#[derive(Parser)]
#[command(
    name = "ionlab",
    version,
    about = "Trapped-ion quantum state engineering simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print crystal equilibrium positions, normal modes, and sideband lines.
    Modes {
        /// Config file (trap/ion/laser/... lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of ions in the crystal.
        #[arg(long)]
        ions: Option<usize>,
        /// Write a CSV copy of the tables here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a pulse-sequence program and emit the scan CSV.
    Run {
        /// Sequence program file.
        sequence: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master RNG seed for shot sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the measure step's shot count.
        #[arg(long)]
        shots: Option<u64>,
        /// Oracle mode: exact probabilities, no shot noise (shots = 0).
        #[arg(long)]
        oracle: bool,
        /// Output CSV path (stdout when omitted; manifests need a path).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit a gnuplot script for the output CSV.
        #[arg(long)]
        gnuplot_script: Option<PathBuf>,
    },
    /// Fit a scan CSV: thermometry, lorentzian, flop, ramsey, heating.
    Fit {
        #[command(subcommand)]
        kind: FitKind,
    },
    /// Scan the blue-sideband π-pulse infidelity versus pulse time.
    Gatespeed {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Gate fidelity target in (0,1).
        #[arg(long, default_value_t = 0.99)]
        target: f64,
        /// Shortest π-time probed (s/ms/us suffixes).
        #[arg(long, default_value = "2us")]
        tmin: String,
        /// Longest π-time probed.
        #[arg(long, default_value = "300us")]
        tmax: String,
        /// Number of log-spaced grid points.
        #[arg(long, default_value_t = 28)]
        points: usize,
        /// Trap axis of the addressed mode.
        #[arg(long, default_value = "z")]
        axis: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FitKind {
    /// Sideband-ratio thermometry from a red and a blue sideband scan.
    Thermometry {
        #[arg(long)]
        red: PathBuf,
        #[arg(long)]
        blue: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lorentzian peak fit of a detuning scan.
    Lorentzian {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        peaks: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fock-population extraction from a blue-sideband flopping scan.
    Flop {
        input: PathBuf,
        /// Lamb-Dicke parameter of the addressed mode.
        #[arg(long)]
        eta: f64,
        /// Bare Rabi frequency (Hz/kHz/MHz suffixes, cycle units).
        #[arg(long)]
        omega: String,
        /// Highest Fock index retained.
        #[arg(long, default_value_t = 4)]
        ncut: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ramsey fringe fit of a detuning scan.
    Ramsey {
        input: PathBuf,
        /// Duration of each π/2 pulse (s/ms/us).
        #[arg(long)]
        pulse: String,
        /// Gap between the pulses (s/ms/us).
        #[arg(long)]
        gap: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heating-rate regression from red/blue wait scans.
    Heating {
        #[arg(long)]
        red: PathBuf,
        #[arg(long)]
        blue: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Modes { config, ions, out } => {
            commands::cmd_modes(config.as_deref(), ions, out.as_deref())
        }
        Command::Run {
            sequence,
            config,
            seed,
            shots,
            oracle,
            out,
            gnuplot_script,
        } => commands::cmd_run(&RunArgs {
            sequence: &sequence,
            config: config.as_deref(),
            seed,
            shots,
            oracle,
            out: out.as_deref(),
            gnuplot_script: gnuplot_script.as_deref(),
        }),
        Command::Fit { kind } => match kind {
            FitKind::Thermometry { red, blue, out } => {
                commands::cmd_fit_thermometry(&red, &blue, out.as_deref())
            }
            FitKind::Lorentzian { input, peaks, out } => {
                commands::cmd_fit_lorentzian(&input, peaks, out.as_deref())
            }
            FitKind::Flop {
                input,
                eta,
                omega,
                ncut,
                out,
            } => {
                let omega = parse_freq_arg(&omega)?;
                commands::cmd_fit_flop(&input, eta, omega, ncut, out.as_deref())
            }
            FitKind::Ramsey {
                input,
                pulse,
                gap,
                out,
            } => {
                let pulse = parse_time_arg(&pulse)?;
                let gap = parse_time_arg(&gap)?;
                commands::cmd_fit_ramsey(&input, pulse, gap, out.as_deref())
            }
            FitKind::Heating { red, blue, out } => {
                commands::cmd_fit_heating(&red, &blue, out.as_deref())
            }
        },
        Command::Gatespeed {
            config,
            target,
            tmin,
            tmax,
            points,
            axis,
            out,
        } => {
            let t_min = parse_time_arg(&tmin)?;
            let t_max = parse_time_arg(&tmax)?;
            let axis = axis.parse::<ionlab::quantum::Axis>()?;
            commands::cmd_gatespeed(&GateSpeedArgs {
                config: config.as_deref(),
                target,
                t_min,
                t_max,
                points,
                axis,
                out: out.as_deref(),
            })
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<IonError>() {
        Some(IonError::Parse { .. }) | Some(IonError::Schema(_)) => 1,
        Some(IonError::Domain(_)) | Some(IonError::Solver(_)) | Some(IonError::Integrator(_)) => 2,
        Some(IonError::Fit(_)) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    // IONLAB_THREADS caps the scan worker pool; results are identical for
    // any worker count.
    if let Ok(threads) = std::env::var("IONLAB_THREADS") {
        if let Ok(n) = threads.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
