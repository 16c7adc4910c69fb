//! Command-line front end and read-only HTTP service for `ubench-core`.
//!
//! [`run`] is the whole program: `main` only forwards process arguments and
//! standard streams to it, which keeps every verb testable in-process.

pub mod api;
mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};
pub use output::write_atomic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Failure of a verb, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: missing or conflicting options.
    Usage(String),
    /// Valid invocation that failed on its inputs.
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Domain(e)
    }
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("UBENCH_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

/// Parses `argv` (program name first) and executes the verb. Returns the
/// process exit code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        // A reader that hung up early (`ubench ... | head`) is not a failure.
        Err(CliError::Domain(e)) if is_broken_pipe(&e) => EXIT_OK,
        Err(CliError::Domain(e)) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_DOMAIN
        }
    }
}
