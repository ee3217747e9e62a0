//! `oatune`: design, run, analyze, retrain and apply Taguchi-tuned stiffness networks.

mod commands;
mod error;
mod manifest;
mod options;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "oatune",
    version,
    about = "Taguchi orthogonal-array tuning of composite stiffness networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the decoded orthogonal-array design.
    Design(commands::DesignArgs),
    /// Train every run of the design and record its response.
    Run(commands::RunArgs),
    /// Compute main effects from a responses file and select the optimum.
    Analyze(commands::AnalyzeArgs),
    /// Retrain the selected configuration and report its metrics.
    TrainBest(commands::TrainBestArgs),
    /// Predict stiffness components and moduli with a trained model.
    Predict(commands::PredictArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Design(a) => commands::design(a),
        Command::Run(a) => commands::run(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::TrainBest(a) => commands::train_best(a),
        Command::Predict(a) => commands::predict(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}
