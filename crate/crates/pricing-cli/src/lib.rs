//! Command-line driver for the pricing library.
//!
//! The binary front end (`pricing`) parses flags and dispatches into
//! [`commands`] and [`experiment`]; everything below the flag layer
//! lives here so integration tests can drive it in-process.

use std::fmt;

pub mod commands;
pub mod config;
pub mod experiment;

/// Caller mistake (bad flag value, malformed range) as opposed to a
/// runtime failure. The binary maps these to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}
