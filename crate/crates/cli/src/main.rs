//! `repalign` command-line tool.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 an asserted
//! bound was violated (the report is still written).

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use repalign_core::AlignError;

use args::{Cli, Command};
use commands::Outcome;

fn error_json(code: &str, message: &str) {
    let v = serde_json::json!({ "error": { "code": code, "message": message } });
    eprintln!("{v}");
}

fn run(cli: &Cli) -> repalign_core::Result<Outcome> {
    if let Some(k) = cli.common.threads {
        if k == 0 {
            return Err(AlignError::InvalidParameter(
                "--threads must be positive".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| AlignError::InvalidParameter(e.to_string()))?;
    }
    match &cli.command {
        Command::Align(a) => commands::align(a, &cli.common),
        Command::Stitch(a) => commands::stitch(a, &cli.common),
        Command::Task(a) => commands::task(a, &cli.common),
        Command::Synth(a) => commands::synth(a, &cli.common),
        Command::Concentrate(a) => commands::concentrate(a, &cli.common),
    }
}

fn exit_code(result: &repalign_core::Result<Outcome>) -> u8 {
    match result {
        Ok(Outcome::Clean) => 0,
        Ok(Outcome::BoundViolation) => 3,
        Err(e) if e.is_validation() => 2,
        Err(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            error_json("UsageError", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    let result = run(&cli);
    match &result {
        Ok(Outcome::Clean) => {}
        Ok(Outcome::BoundViolation) => {
            error_json("BoundViolation", "an asserted bound was violated")
        }
        Err(e) => error_json(e.code(), &e.to_string()),
    }
    ExitCode::from(exit_code(&result))
}
