use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("aperture side / cell pitch = {ratio} is not a positive integer")]
    NonIntegerGrid { ratio: f64 },

    #[error("cannot place {requested} elements with layout {layout} inside a {aperture} m aperture")]
    LayoutOverflow {
        requested: usize,
        layout: &'static str,
        aperture: f64,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("source and target coincide (zero propagation distance)")]
    ZeroDistance,

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("channel matrix is rank deficient for zero-forcing (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("channel file format error at byte offset {offset}: {reason}")]
    ChannelFormat { offset: u64, reason: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::NonIntegerGrid { .. }
            | Error::LayoutOverflow { .. }
            | Error::InvalidGeometry(_) => 2,
            Error::Numerical(_) | Error::RankDeficient { .. } | Error::ZeroDistance => 3,
            Error::Io(_) => 4,
            // A malformed or mismatched channel file is an input problem.
            Error::ChannelFormat { .. } => 4,
            Error::DimensionMismatch { .. } => 2,
        }
    }
}
