use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants fall into two groups: I/O failures (the filesystem said no) and
/// validation failures (the data or configuration is wrong). The CLI maps the
/// first group to exit code 3 and everything else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"CEEG\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("reserved header byte must be 0, found {0}")]
    ReservedByte(u8),
    #[error("truncated payload: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("trailing bytes after last trial: {0}")]
    TrailingBytes(usize),
    #[error("non-finite amplitude in trial {trial}, channel {channel}, sample {sample}")]
    NonFiniteAmplitude {
        trial: usize,
        channel: usize,
        sample: usize,
    },
    #[error("file name {0:?} does not follow the <subject>_ses-<k>.ceeg convention")]
    FileName(String),

    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frequency {freq_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    AboveNyquist { freq_hz: f64, nyquist_hz: f64 },
    #[error("no valid notch below Nyquist for base {0} Hz")]
    NoNotchBelowNyquist(f64),
    #[error("infeasible filter: {0}")]
    InfeasibleFilter(String),
    #[error("channel index {index} out of range for {n_channels} channels")]
    ChannelIndex { index: usize, n_channels: usize },
    #[error("channel {0:?} has no montage position")]
    MissingPosition(String),
    #[error("too few good channels: {good} good, at least {required} required")]
    TooFewGoodChannels { good: usize, required: usize },
    #[error("need at least {required} channels, found {found}")]
    TooFewChannels { required: usize, found: usize },
    #[error("trial {trial} too short: needs {needed} samples, has {available}")]
    TrialTooShort {
        trial: usize,
        needed: usize,
        available: usize,
    },
    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("single class in training data")]
    SingleClass,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("all features have zero variance on the training rows")]
    DegenerateFeatures,
    #[error("session {session} of subject {subject:?} belongs to no split")]
    UnassignedSession { subject: String, session: u8 },
    #[error("test session absent for subject {0:?}")]
    TestSessionAbsent(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a filesystem failure.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
