use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("channel {channel} has {found} samples, expected {expected}")]
    RowLength {
        channel: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown channel label {0:?}")]
    UnknownChannel(String),

    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),

    #[error("sample rate mismatch: file has {found} Hz, expected {expected} Hz")]
    RateMismatch { expected: f64, found: f64 },

    #[error("electrode {0:?} has a zero coordinate and cannot be normalised")]
    ZeroCoordinate(String),

    #[error("montage parse error on line {line}: {message}")]
    MontageParse { line: usize, message: String },

    #[error("component at {frequency} Hz is not below the Nyquist frequency {nyquist} Hz")]
    AboveNyquist { frequency: f64, nyquist: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("recording of {samples} samples is shorter than one window of {window} samples")]
    RecordingTooShort { samples: usize, window: usize },

    #[error("{what} of {value} samples is not an integer at {rate} Hz")]
    NonIntegerSamples {
        what: &'static str,
        value: f64,
        rate: f64,
    },

    #[error("band {0} contains no frequency bins")]
    EmptyBand(String),

    #[error("channel {0} has zero mean in-band amplitude")]
    DegenerateChannel(String),

    #[error("electrode {0:?} sits at the antipode of the vertex")]
    Antipodal(String),

    #[error("all {0} points are collinear")]
    Collinear(usize),

    #[error("at least 3 electrodes are required, got {0}")]
    TooFewElectrodes(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("need at least {needed} windows, got {found}")]
    TooFewWindows { needed: usize, found: usize },

    #[error("aggregation modes differ within one dataset: {0} vs {1}")]
    MixedAggregation(String, String),

    #[error("plan needs {requested} participants, only {available} available")]
    NotEnoughParticipants { requested: usize, available: usize },

    #[error("MAPE is undefined: observed value at index {0} is zero")]
    UndefinedMape(usize),

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("bad file format: {0}")]
    Format(String),

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

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
