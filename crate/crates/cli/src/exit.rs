//! Exit statuses. Argument errors keep clap's status 2.

use std::fmt;

use gcpim::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Other = 1,
    Parse = 3,
    Capacity = 4,
    Calibration = 5,
    Io = 6,
    /// Inputs or config that do not fit the program or model.
    Data = 7,
    /// A Monte Carlo rate fell below the configured floor.
    Floor = 8,
}

/// An error that carries its own exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub msg: String,
}

impl Failure {
    pub fn new(code: ExitCode, msg: impl Into<String>) -> Self {
        Failure {
            code,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Failure {}

fn of_lib(e: &Error) -> ExitCode {
    match e {
        Error::Syntax { .. } | Error::Undeclared { .. } | Error::Empty => ExitCode::Parse,
        Error::Capacity { .. } => ExitCode::Capacity,
        Error::Calibration { .. } => ExitCode::Calibration,
        Error::WidthMismatch { .. } | Error::Config(_) | Error::Program(_) | Error::Usage(_) => ExitCode::Data,
        _ => ExitCode::Other,
    }
}

pub fn classify(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return of_lib(e);
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return ExitCode::Io;
        }
    }
    ExitCode::Other
}
