//! Command implementations behind the `visionguide` binary.
//!
//! Each command takes a resolved [`RunConfig`] and returns a summary; the
//! binary only parses flags, prints, and maps errors to exit codes.

pub mod args;
pub mod commands;
pub mod config;

use std::fmt;

pub use commands::{evaluate, localise, sweep, synth, train};
pub use config::{ClassifierSource, RunConfig};

/// A problem with the configuration itself, found before any work starts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// One or more inputs failed; the others were processed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFailure {
    pub failed: usize,
    pub total: usize,
}

impl fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {} inputs failed", self.failed, self.total)
    }
}

impl std::error::Error for PartialFailure {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INTERNAL: u8 = 2;

/// 1 for bad inputs or configuration, 2 when an internal invariant broke.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use visionguide_core::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<PartialFailure>() || cause.is::<std::io::Error>() {
            return EXIT_INPUT;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidImage(_) | E::DimensionMismatch(_) | E::FeatureLengthMismatch { .. } => {
                    EXIT_INTERNAL
                }
                _ => EXIT_INPUT,
            };
        }
    }
    EXIT_INTERNAL
}

/// Bounded pool; results collected from it keep input order.
pub fn worker_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(ConfigError("workers must be at least 1".into()).into());
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}
