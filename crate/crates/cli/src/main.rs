//! One binary, five workflows: serve a simulated STH-over-DNS log
//! endpoint, run pcaps through the aggregation pipeline, feed clones to a
//! challenger, execute simulation scenarios, and produce coverage
//! analyses.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ctgossip", version, about = "Aggregation-based gossip toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve a log's STHs over UDP as IN TXT responses.
    Logserve(commands::logserve::Args),
    /// Run a pcap through the inline aggregation pipeline.
    Aggregate(commands::aggregate::Args),
    /// Ingest cloned packets, audit consistency, and emit a report.
    Challenge(commands::challenge::Args),
    /// Run a simulation scenario and print DETECTED / NOT-DETECTED.
    Simulate(commands::simulate::Args),
    /// Traceroute-based coverage analysis with plot-ready output.
    Coverage(commands::coverage::Args),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful terminations; everything
            // else is a usage error.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Logserve(args) => commands::logserve::run(args),
        Command::Aggregate(args) => commands::aggregate::run(args),
        Command::Challenge(args) => commands::challenge::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Coverage(args) => commands::coverage::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
