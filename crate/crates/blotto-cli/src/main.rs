//! Command-line driver for the nine-state allocation-game tournament
//! engine: input validation, round-robin standings, LLM strategy
//! elicitation, the full analysis artifact set, archived-dataset replay,
//! and best-response search.
//!
//! Exit codes: 0 on success, 1 when the command ran but found validation
//! failures (excluded rows, a pool shortfall, failed replay checks), 2 for
//! fatal errors, which are reported as a single `error: <kind>: <detail>`
//! line on stderr.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "blotto",
    version,
    about = "Tournament engine for a nine-state allocation game",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    overrides: config::Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the inputs and report every excluded row.
    Validate,
    /// Run the round-robin and write standings.
    Run,
    /// Elicit a strategy pool from a chat-completions endpoint.
    FetchLlm(commands::FetchArgs),
    /// Write standings plus the full analysis artifact set.
    Analyze,
    /// Rebuild the archived tournaments and compare published values.
    Replay(commands::ReplayArgs),
    /// Compute a best response to a submission pool.
    BestResponse(commands::BestResponseArgs),
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = config::resolve(&cli.overrides)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| anyhow::anyhow!("config: cannot size the worker pool: {e}"))?;
    }
    match cli.command {
        Command::Validate => commands::validate(&cfg),
        Command::Run => commands::run(&cfg),
        Command::FetchLlm(args) => commands::fetch_llm(&cfg, &args),
        Command::Analyze => commands::analyze(&cfg),
        Command::Replay(args) => commands::replay(&cfg, &args),
        Command::BestResponse(args) => commands::best_response(&cfg, &args),
    }
}
