//! `selmem`: capture frames, answer memory queries, manage users and run
//! the evaluation suites.

mod cmd;
mod config;
mod error;
mod session;
mod setup;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{CliConfig, GlobalArgs};

#[derive(Debug, Parser)]
#[command(name = "selmem", version, about = "Selective multimodal memory engine")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a session file through the capture gate
    Capture(cmd::capture::CaptureArgs),
    /// Answer an utterance: retrieve, update the profile, or end the session
    Query(cmd::query::QueryArgs),
    /// List or delete users
    #[command(subcommand)]
    Users(cmd::users::UsersCmd),
    /// Run an evaluation suite
    #[command(subcommand)]
    Eval(cmd::eval::EvalCmd),
    /// Time hybrid retrieval on a synthetic store
    Bench(cmd::bench::BenchArgs),
    /// Show the store manifest or one user's records
    Inspect(cmd::inspect::InspectArgs),
}

fn run(cli: Cli) -> error::Result<()> {
    let cfg = CliConfig::resolve(&cli.global)?;
    match &cli.command {
        Command::Capture(a) => cmd::capture::run(&cfg, a),
        Command::Query(a) => cmd::query::run(&cfg, a),
        Command::Users(c) => cmd::users::run(&cfg, c),
        Command::Eval(c) => cmd::eval::run(&cfg, c),
        Command::Bench(a) => cmd::bench::run(&cfg, a),
        Command::Inspect(a) => cmd::inspect::run(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
