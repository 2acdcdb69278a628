use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("{path}: {source}")]
    WithPath {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported sample rate {found} Hz (only {expected} Hz is accepted)")]
    SampleRate { found: u32, expected: u32 },

    #[error("audio clip has no samples")]
    EmptyClip,

    #[error("immeasurable loudness: every gating block is below the absolute gate")]
    ImmeasurableLoudness,

    #[error("clip too short: need at least {needed} samples, got {found}")]
    ClipTooShort { needed: usize, found: usize },

    #[error("sample magnitude {max_abs} exceeds full scale; 16-bit output would clip")]
    OutOfRange { max_abs: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent spectrogram frames: {0}")]
    InconsistentFrames(String),

    #[error("band layout mismatch: expected {expected} bands, got {found}")]
    BandMismatch { expected: usize, found: usize },

    #[error("misaligned frame sequences: {left} vs {right} frames")]
    MisalignedFrames { left: usize, right: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: need at least {needed} values, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("insufficient matched stimuli: {found} matched (need at least {needed})")]
    InsufficientMatches { needed: usize, found: usize },

    #[error("degenerate clip: {0}")]
    DegenerateClip(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(#[from] toml::de::Error),
}

impl Error {
    pub fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::WithPath {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
