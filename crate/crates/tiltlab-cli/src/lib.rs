//! Command-line front end for `tiltlab`: run configuration, sampling commands and
//! the verification suites.

pub mod cli;
pub mod config;
pub mod error;
pub mod run;
pub mod suites;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{execute, Outcome};

/// Exit status for a run: 0 success, 1 a verification check failed, 2 a usage or runtime error.
pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(o) if o.all_passed() => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}
