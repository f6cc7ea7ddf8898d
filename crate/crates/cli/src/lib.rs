//! The `putwb` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure,
//! 130 interrupted after the checkpoint was written.

pub mod args;
mod commands;
pub mod resolve;
mod sweep;

use std::ffi::OsString;
use std::sync::OnceLock;

use clap::Parser;

use putwb_core::engine::{Control, EngineError};
use putwb_core::tools::ToolsError;
use putwb_core::Error;

pub use args::Cli;
pub use sweep::{parse_put_numbers, parse_sizes};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
    /// Cancelled by a signal; the checkpoint is on disk.
    Interrupted,
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Interrupted => EXIT_INTERRUPTED,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::PutModel(_) | Error::Invalid(_) | Error::Tools(ToolsError::EmptySetList) => Failure::Usage(msg),
            Error::Dataset(_) | Error::Io { .. } | Error::Genset(_) | Error::Tools(_) => Failure::Data(msg),
            Error::Engine(EngineError::InvalidDataset(_))
            | Error::Engine(EngineError::DigestMismatch { .. })
            | Error::Engine(EngineError::VersionMismatch { .. })
            | Error::Engine(EngineError::TornCheckpoint(_))
            | Error::Engine(EngineError::NotACheckpoint) => Failure::Data(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

static CONTROL: OnceLock<Control> = OnceLock::new();

/// The process-wide control a first interrupt cancels. A second interrupt
/// exits at once.
pub(crate) fn control() -> Control {
    CONTROL
        .get_or_init(|| {
            let c = Control::new();
            let handle = c.clone();
            let installed = ctrlc::set_handler(move || {
                if handle.is_cancelled() {
                    std::process::exit(EXIT_INTERRUPTED);
                }
                eprintln!("interrupted; writing checkpoint");
                handle.cancel();
            });
            if let Err(e) = installed {
                log::warn!("no interrupt handler: {e}");
            }
            c
        })
        .clone()
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("PUTWB_LOG")
        .format_target(false)
        .try_init();
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    init_logging(&cli);
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Data(m) => eprintln!("data error: {m}"),
                Failure::Runtime(m) => eprintln!("failed: {m}"),
                Failure::Interrupted => {}
            }
            f.code()
        }
    }
}
