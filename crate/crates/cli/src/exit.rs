use std::path::Path;

use lrt_core::Error;
use serde::Serialize;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Partial = 1,
    Config = 2,
    Io = 3,
    Pairing = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub code: Code,
    pub message: String,
}

impl CliError {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// Failure while reading or decoding `path`.
    pub fn input(path: &Path, e: Error) -> Self {
        match e {
            Error::Io { .. } => Self::new(Code::Io, e.to_string()),
            e => Self::new(Code::Io, format!("{}: {e}", path.display())),
        }
    }

    pub fn config(path: &Path, e: Error) -> Self {
        Self::new(Code::Config, format!("config {}: {e}", path.display()))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::new(Code::Io, format!("serializing report: {e}")))
}
