//! `echopw` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or invalid argument, 2 data, format or
//! I/O problem, 3 numerical failure.

mod args;
mod commands;
mod report;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use report::{CompareReport, MetricsReport, RoiDocument};

use crate::error::Error;

/// Environment variable capping internal parallelism; 0 or unset means auto.
pub const THREADS_ENV: &str = "ECHOPW_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Config(_)
        | Error::Shape { .. }
        | Error::Format { .. }
        | Error::Io { .. }
        | Error::Json { .. } => EXIT_DATA,
        Error::DegenerateInput(_)
        | Error::MeasurementUndefined(_)
        | Error::Denoiser(_)
        | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

fn configure_threads() -> Result<(), String> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let text = raw.to_string_lossy();
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a nonnegative integer, got {text:?}"))?;
    if n > 0 {
        // A pool may already exist when embedded; the first setting wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match commands::execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
