mod args;
mod commands;
mod error;
mod scenario;
mod sweep;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Method};
use error::CliResult;
use scenario::Config;

fn run(cli: &Cli) -> CliResult<()> {
    let config = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Current(a) => commands::current(a, &config),
        Command::Cumulants(a) => commands::cumulants(a, &config),
        Command::Sweep(a) => {
            let rows = sweep::run_sweep(a, &config)?;
            sweep::write_csv(&rows, a.out.as_deref())?;
            if a.method == Some(Method::Both) {
                sweep::check_discrepancies(&rows)?;
            }
            Ok(())
        }
        Command::Transient(a) => commands::transient(&a.mode, &config),
        Command::Equilibrium(a) => commands::equilibrium(a, &config),
        Command::VerifyFt(a) => commands::verify_ft(a, &config),
        Command::Oracle(a) => commands::oracle(a, &config),
        Command::Selftest => commands::selftest(),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed arguments
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
