//! Command-line pipeline around the `scoremap` library.

pub mod commands;
pub mod config;
pub mod manifest;

use config::ConfigError;

/// Process exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<scoremap::Error>() {
            return match e {
                e if e.is_numerical() => 3,
                scoremap::Error::InvalidInput(_)
                | scoremap::Error::UnknownProblem(_)
                | scoremap::Error::InsufficientRecords { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}
