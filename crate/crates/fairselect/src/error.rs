use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("instance too large for exhaustive search: n={n}, p={p} (limits n<=8, p<=4)")]
    SearchScale { n: usize, p: usize },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for bad input or configuration,
    /// 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LengthMismatch(_)
            | Error::InvalidInput(_)
            | Error::Config(_)
            | Error::Infeasible(_)
            | Error::SearchScale { .. }
            | Error::Parse { .. }
            | Error::Json(_) => 1,
            Error::Io(_) | Error::Csv(_) => 2,
        }
    }

    /// True when the error is a closed stdout pipe, e.g. `... | head`.
    pub fn is_broken_pipe(&self) -> bool {
        match self {
            Error::Io(e) => e.kind() == std::io::ErrorKind::BrokenPipe,
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(io) => io.kind() == std::io::ErrorKind::BrokenPipe,
                _ => false,
            },
            _ => false,
        }
    }
}
