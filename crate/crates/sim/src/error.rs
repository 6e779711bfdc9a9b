use std::path::PathBuf;

use serde::Serialize;
use sisa_core::baselines::ArchError;
use sisa_core::scheduler::ScheduleError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl ToString) -> Self {
        Error::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io { .. } => 2,
            Error::Infeasible(_) => 3,
            Error::Validation(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } | Error::Io { .. } => "config",
            Error::Infeasible(_) => "infeasible",
            Error::Validation(_) => "validation",
        }
    }

    /// Machine-readable form printed by the CLI on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Body {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("plain struct serializes")
    }
}

impl From<ScheduleError> for Error {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::InfeasibleCapacity { .. } => Error::Infeasible(e.to_string()),
            _ => Error::config("gemm", e),
        }
    }
}

impl From<ArchError> for Error {
    fn from(e: ArchError) -> Self {
        match e {
            ArchError::Schedule(s) => s.into(),
            other => Error::config("baselines", other),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
