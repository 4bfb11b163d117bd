mod commands;
mod config;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{evaluate, experiment, solve, synth, verify};

#[derive(Parser)]
#[command(name = "bestsubset", version, about = "Certified best subset selection for logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one constrained best subset problem on a CSV dataset.
    Solve(solve::SolveArgs),
    /// Write the synthetic scenario datasets.
    Synth(synth::SynthArgs),
    /// Run the cardinality or budget experiment suite.
    Experiment(experiment::ExperimentArgs),
    /// Bootstrap nested cross-validation of one selector on a CSV dataset.
    Evaluate(evaluate::EvaluateArgs),
    /// Run the cross-oracle self-check battery.
    Verify(verify::VerifyArgs),
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_RESOURCE: u8 = 4;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl From<bestsubset::Error> for Failure {
    fn from(e: bestsubset::Error) -> Self {
        use bestsubset::Error as E;
        let code = match e {
            E::Unbounded | E::Infeasible | E::SingleClass | E::FoldTooSmall { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Experiment(a) => experiment::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Verify(a) => verify::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
