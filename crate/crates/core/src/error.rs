use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("joint mismatch: {0}")]
    JointMismatch(String),

    #[error("invalid skeleton: {0}")]
    Skeleton(String),

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("degenerate pose at frame {frame}: {reason}")]
    DegeneratePose { frame: usize, reason: String },

    #[error("infeasible angles at frame {frame}, joint {joint}: squared norm {norm_sq}")]
    InfeasibleAngles {
        frame: usize,
        joint: String,
        norm_sq: f64,
    },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("missing codebook for channel `{0}`")]
    MissingCodebook(String),

    #[error("shape length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid letter {s} for channel `{channel}` (codebook has {k} letters)")]
    InvalidLetter { channel: String, s: i64, k: usize },

    #[error("tiling violation in channel `{channel}`: {message}")]
    Tiling { channel: String, message: String },

    #[error("token ordering violation in channel `{channel}`: start {start} after {previous}")]
    Ordering {
        channel: String,
        start: usize,
        previous: usize,
    },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Short machine-readable tag used by the CLI's single-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::JointMismatch(_) => "joint-mismatch",
            Error::Skeleton(_) => "skeleton",
            Error::Invalid(_) => "invalid",
            Error::DegeneratePose { .. } => "degenerate-pose",
            Error::InfeasibleAngles { .. } => "infeasible-angles",
            Error::UnknownChannel(_) => "unknown-channel",
            Error::MissingCodebook(_) => "missing-codebook",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::InvalidLetter { .. } => "invalid-letter",
            Error::Tiling { .. } => "tiling",
            Error::Ordering { .. } => "ordering",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
