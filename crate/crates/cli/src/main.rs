mod config;
mod error;
mod eval;
mod gen;
mod gradcheck;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "ilploss", version, about = "Learn ILP constraints and costs from optimal solutions")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a train/test dataset pair.
    Gen(gen::GenFlags),
    /// Fit a model and write snapshot, log and summary.
    Train(train::TrainFlags),
    /// Solve a dataset with a trained model and report accuracy.
    Eval(eval::EvalFlags),
    /// Finite-difference audit of the loss gradients.
    Gradcheck(gradcheck::GradcheckFlags),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(f) => gen::run(f),
        Command::Train(f) => train::run(f),
        Command::Eval(f) => eval::run(f),
        Command::Gradcheck(f) => gradcheck::run(f),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
