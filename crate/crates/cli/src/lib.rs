//! `mfgait` command-line driver. Every artifact lands in the `--out`
//! directory next to a `manifest.json` of SHA-256 hashes.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use args::{Cli, Command};
pub use config::RunConfig;
pub use error::CliError;

pub fn execute(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Plan(a) => commands::plan(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Replay(a) => commands::replay_cmd(a),
        Command::Calibrate(a) => commands::calibrate_cmd(a),
        Command::Report(a) => commands::report(a),
    }
}

/// Runs `cli` and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(&cli.command) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
