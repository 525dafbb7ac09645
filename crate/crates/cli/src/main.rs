mod args;
mod commands;
mod config;
mod manifest;
mod report;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Invalid flags or flag combinations; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const USAGE: u8 = 1;
const DATA: u8 = 2;

fn exit_code(err: &anyhow::Error) -> ExitCode {
    if err.downcast_ref::<UsageError>().is_some() {
        ExitCode::from(USAGE)
    } else {
        ExitCode::from(DATA)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(err) => {
            eprintln!("error: {err:#}");
            return exit_code(&err);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let name = cli.command.name();
    let result = match &cli.command {
        Command::Train(a) => commands::run_train(a),
        Command::Predict(a) => commands::run_predict(a),
        Command::Eval(a) => commands::run_eval(a),
        Command::Divergence(a) => commands::run_divergence(a),
        Command::Lexicon(a) => commands::run_lexicon(a),
        Command::Synth(a) => commands::run_synth(a),
        Command::Baseline(a) => commands::run_baseline(a),
        Command::PlotData(a) => commands::run_plot_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{name}: error: {err:#}");
            exit_code(&err)
        }
    }
}
