// SPDX-License-Identifier: Apache-2.0

use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const INPUT: u8 = 2;
    /// The service refused the request or could not be reached.
    pub const SERVER: u8 = 3;
    /// A verification failed or drift exceeded the threshold.
    pub const VERIFY: u8 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: m.into(),
        }
    }

    pub fn input(m: impl Into<String>) -> Self {
        Self {
            code: exit::INPUT,
            message: m.into(),
        }
    }

    pub fn server(m: impl Into<String>) -> Self {
        Self {
            code: exit::SERVER,
            message: m.into(),
        }
    }

    pub fn verify(m: impl Into<String>) -> Self {
        Self {
            code: exit::VERIFY,
            message: m.into(),
        }
    }

    /// Prefixes the message with the stage that failed.
    pub fn at(mut self, stage: &str) -> Self {
        self.message = format!("{stage}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
