mod args;
mod commands;
mod output;
mod setup;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::OutputError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Estimate { data, est, out } => commands::estimate(data, est, out),
        Command::Winselect { data, win, out } => commands::winselect(data, win, out),
        Command::Randinf { data, rand, out } => commands::randinf(data, rand, out),
        Command::Density { data, dens, out } => commands::density(data, dens, out),
        Command::Falsify {
            data,
            est,
            fals,
            out,
        } => commands::falsify(data, est, fals, out),
        Command::Plot { data, plot, out } => commands::plot(data, plot, out),
        Command::Simulate { sim, est, out } => commands::simulate(sim, est, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<OutputError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
