use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: unsupported encoding ({detail})")]
    UnsupportedEncoding { path: PathBuf, detail: String },

    #[error("sample rate {found} Hz, expected {expected} Hz")]
    SampleRate { expected: u32, found: u32 },

    #[error("clip is empty")]
    EmptyClip,

    #[error("sample {index} is not a finite value in [-1, 1]: {value}")]
    BadSample { index: usize, value: f32 },

    #[error("length mismatch for {what}: expected {expected}, got {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} too short: need at least {needed} samples, got {found}")]
    TooShort {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("offset {offset} outside valid range [{lo}, {hi}]")]
    OffsetOutOfRange { offset: usize, lo: usize, hi: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scorer: {0}")]
    Scorer(String),

    #[error("manifest row {row}: {msg}")]
    Manifest { row: usize, msg: String },

    #[error("unknown class '{0}'")]
    UnknownClass(String),

    #[error("weights: {0}")]
    Weights(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
