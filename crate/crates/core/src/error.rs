use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {samples} samples, need at least {needed} for one window")]
    SignalTooShort { samples: usize, needed: usize },

    #[error("cannot scale noise against silent signal")]
    SilentSignal,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("requested {requested} components but the data only supports {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("grid mismatch for utterance {utterance}: {detail}")]
    GridMismatch { utterance: String, detail: String },

    #[error("phoneme label {0:?} has no vowel/consonant class")]
    UnmappedPhoneme(String),

    #[error("baseline at chance")]
    BaselineAtChance,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage {stage} failed on {utterance}: {source}")]
    Stage {
        stage: &'static str,
        utterance: String,
        #[source]
        source: Box<Error>,
    },
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn stage(stage: &'static str, utterance: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            stage,
            utterance: utterance.into(),
            source: Box::new(source),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Numerical(_) | Error::NonFinite(_) => ErrorClass::Numerical,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}
