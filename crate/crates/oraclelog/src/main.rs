use std::io::Write;
use std::process::ExitCode;

use oraclelog::cli;
use oraclelog_core::Registry;

fn main() -> ExitCode {
    let outcome = match cli::config_from_env() {
        Ok(config) => cli::run(&config, &Registry::with_stdlib()),
        Err(outcome) => outcome,
    };
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(u8::try_from(outcome.status).unwrap_or(1))
}
