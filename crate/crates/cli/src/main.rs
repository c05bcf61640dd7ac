//! `funnelkit` command-line interface.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 infeasible targets.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{parse_gamma, parse_scales, Outcome, Scales};

#[derive(Parser)]
#[command(
    name = "funnelkit",
    version,
    about = "Optimal privacy-utility mechanisms for component-wise discrete data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropies, thresholds and target feasibility of a model
    Analyze { model: PathBuf },

    /// Minimum-leakage allocation, optionally writing the optimal mechanism
    Solve {
        model: PathBuf,
        /// Write the mechanism bundle (per-component and product channels) here
        #[arg(long, value_name = "OUT")]
        emit_mechanism: Option<PathBuf>,
        /// Override the target of task K with V bits (repeatable)
        #[arg(long = "gamma", value_name = "K=V", value_parser = parse_gamma)]
        gammas: Vec<(usize, f64)>,
    },

    /// Leakage, utilities, rate and epsilon of a mechanism
    Eval {
        model: PathBuf,
        /// Channel, mechanism bundle or parallelized channel JSON
        mechanism: PathBuf,
    },

    /// Minimum leakage as all targets are scaled over a grid
    Sweep {
        model: PathBuf,
        /// Grid START:STOP:STEP of multipliers applied to every target
        #[arg(long, value_parser = parse_scales)]
        scales: Scales,
        /// CSV output path
        #[arg(long)]
        out: PathBuf,
        /// Override the target of task K with V bits before scaling (repeatable)
        #[arg(long = "gamma", value_name = "K=V", value_parser = parse_gamma)]
        gammas: Vec<(usize, f64)>,
    },

    /// Rebuild a joint mechanism as a product of per-component mechanisms
    Parallelize {
        model: PathBuf,
        mechanism: PathBuf,
        /// Use the compression construction instead of the privatization one
        #[arg(long)]
        compression: bool,
        /// Write the per-component channels here
        #[arg(long, value_name = "OUT")]
        emit_channel: Option<PathBuf>,
    },

    /// Differential-privacy epsilon (nats) with respect to the private vector
    DpEps { model: PathBuf, mechanism: PathBuf },

    /// Run every verification suite on seeded corpora
    Verify {
        #[arg(long, env = "FUNNELKIT_SEED", default_value_t = 42)]
        seed: u64,
        /// Random channels per component in the converse search; the decoder
        /// sweep uses a tenth of this
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Also check a mechanism against a model
        #[arg(long, num_args = 2, value_names = ["MODEL", "MECHANISM"])]
        mechanism: Option<Vec<PathBuf>>,
    },
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Analyze { model } => commands::analyze(&model),
        Command::Solve {
            model,
            emit_mechanism,
            gammas,
        } => commands::solve(&model, &gammas, emit_mechanism.as_deref()),
        Command::Eval { model, mechanism } => commands::eval(&model, &mechanism),
        Command::Sweep {
            model,
            scales,
            out,
            gammas,
        } => commands::sweep(&model, &gammas, &scales.0, &out),
        Command::Parallelize {
            model,
            mechanism,
            compression,
            emit_channel,
        } => commands::parallelize(&model, &mechanism, compression, emit_channel.as_ref()),
        Command::DpEps { model, mechanism } => commands::dp_eps(&model, &mechanism),
        Command::Verify {
            seed,
            trials,
            mechanism,
        } => {
            let pair = mechanism.as_ref().map(|m| (m[0].as_path(), m[1].as_path()));
            commands::verify(seed, trials, pair)
        }
    }
}

fn error_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<funnelkit::Error>() {
        Some(funnelkit::Error::InfeasibleModel { .. } | funnelkit::Error::Infeasible(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Ok(Outcome::Infeasible) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(error_code(&err))
        }
    }
}
