use serde::Serialize;
use thiserror::Error;

/// Broad failure category, stable across releases so callers can match on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    InvalidInput,
    OutOfDomain,
    NotConverged,
    Singular,
    Io,
    Format,
}

#[derive(Debug, Clone, Error, Serialize)]
#[error("{module}::{operation}: {message}")]
pub struct Error {
    pub module: &'static str,
    pub operation: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn new(
        module: &'static str,
        operation: &'static str,
        kind: ErrorKind,
        message: impl Into<String>,
    ) -> Self {
        Self {
            module,
            operation,
            kind,
            message: message.into(),
        }
    }

    /// JSON record written to stderr by the command-line harness.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({ "error": self })
    }
}

/// Shorthand used inside the modules: `err!(module, op, kind, "fmt", args..)`.
#[macro_export]
macro_rules! err {
    ($m:expr, $op:expr, $kind:ident, $($arg:tt)*) => {
        $crate::error::Error::new($m, $op, $crate::error::ErrorKind::$kind, format!($($arg)*))
    };
}
