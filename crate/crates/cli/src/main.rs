mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use psqkd_core::Error;

use args::{Cli, Command};
use commands::CliError;

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Io(_) => EXIT_IO,
        CliError::Core(e) => match e {
            Error::InvalidParameter(_) => EXIT_USAGE,
            Error::ModelDomain(_) | Error::NoSecureAsymptotes { .. } => EXIT_DOMAIN,
            Error::NonConvergence { .. } | Error::Bracket { .. } | Error::Numerical(_) => {
                EXIT_NUMERICAL
            }
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(config::ConfigError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    let result = match &cli.command {
        Command::Rate(a) => commands::rate(a),
        Command::Region(a) => commands::region(a),
        Command::Threshold(a) => commands::threshold(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Contour(a) => commands::contour(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            match e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Io(e) => eprintln!("error: {e}"),
                CliError::Core(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(code)
        }
    }
}
