mod args;
mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use args::{Cli, Command};
use commands::{Outcome, Status};
use error::{CliError, EXIT_INTERNAL, EXIT_USAGE};

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    status: Status,
    seed: u64,
    threads: usize,
    config: &'a Command,
    result: serde_json::Value,
}

fn dispatch(ctx: &Ctx, command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Validate(a) => commands::validate(a),
        Command::Quantize(a) => commands::quantize_cmd(ctx, a),
        Command::Prune(a) => commands::prune_cmd(ctx, a),
        Command::Align(a) => commands::align_cmd(ctx, a),
        Command::CertifyProb(a) => commands::certify_prob(a),
        Command::CertifyRadius(a) => commands::certify_radius(a),
        Command::WorstCaseRadius(a) => commands::worst_case(a),
        Command::Compare(a) => commands::compare(a),
        Command::Sample(a) => commands::sample(ctx, a),
    }
}

/// Commands whose `--out` names a produced network; their report goes to stdout.
fn writes_network(command: &Command) -> bool {
    matches!(command, Command::Quantize(_) | Command::Prune(_) | Command::Align(_))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let outcome = dispatch(&ctx, &cli.command)?;
    let report = Report {
        tool: "deltacert",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        status: outcome.status,
        seed: cli.seed,
        threads: rayon::current_num_threads(),
        config: &cli.command,
        result: outcome.result,
    };
    let target = if writes_network(&cli.command) { None } else { cli.out.as_deref() };
    io::emit(&report, target)?;
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            e.print().ok();
            return ExitCode::from(code as u8);
        }
    };
    let code = match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code as u8)
}
