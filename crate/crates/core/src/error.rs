use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a RIFF/WAVE file")]
    NotWave,

    #[error("unsupported WAV encoding: format tag {format_tag}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },

    #[error("unsupported channel count {0} (expected 1 or 2)")]
    UnsupportedChannelCount(u16),

    #[error("truncated WAV file: {0}")]
    Truncated(&'static str),

    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("requested crop of {requested} samples exceeds buffer length {available}")]
    CropTooLong { requested: usize, available: usize },

    #[error("buffer too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("unknown effect '{0}'")]
    UnknownEffect(String),

    #[error("effect '{effect}' has no parameter '{param}'")]
    UnknownParam { effect: String, param: String },

    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("filter frequency {f0} Hz outside (0, {nyquist}) Hz")]
    FrequencyOutOfRange { f0: f64, nyquist: f64 },

    #[error("invalid filter quality factor {0}")]
    InvalidQ(f64),

    #[error("chain spec line {line}: {message}")]
    ChainSpec { line: usize, message: String },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("non-finite fitness value at candidate {0}")]
    NonFiniteFitness(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("k-means needs k <= points (k = {k}, points = {points})")]
    TooFewPoints { k: usize, points: usize },

    #[error("correlation undefined for constant sequence")]
    ConstantSequence,

    #[error("corpus too small: {have} clips, need {need}")]
    CorpusTooSmall { have: usize, need: usize },

    #[error("no WAV files in {0}")]
    EmptyDirectory(PathBuf),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
