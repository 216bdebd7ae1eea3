use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("csv error")]
    Csv(#[from] csv::Error),

    #[error("io error")]
    Io(#[from] std::io::Error),

    #[error("json error")]
    Json(#[from] serde_json::Error),

    #[error("unmapped weather condition `{0}`")]
    UnmappedCondition(String),

    #[error("invalid condition table: {0}")]
    InvalidTable(String),

    #[error("need at least 2 samples to split, got {0}")]
    TooFewSamples(usize),

    #[error("invalid test fraction {0}, expected a value in (0, 1)")]
    InvalidFraction(f64),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature vector has {got} values, expected {expected}")]
    Arity { expected: usize, got: usize },

    #[error("class counts are empty")]
    EmptyCounts,

    #[error("k = {k} is invalid for {n} training samples")]
    InvalidK { k: usize, n: usize },

    #[error("predictions and labels differ in length ({predictions} vs {labels})")]
    LengthMismatch { predictions: usize, labels: usize },

    #[error("nothing to evaluate")]
    EmptyEvaluation,

    #[error("prediction failed for test sample {index}")]
    Prediction {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported model version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("actuator sink write failed")]
    Sink(#[source] std::io::Error),

    #[error("malformed actuator signal `{0}`")]
    BadSignal(String),

    #[error("frame tick {got} is not after previous tick {previous}")]
    NonMonotonicTick { previous: u64, got: u64 },
}

impl Error {
    /// True for failures where re-sending on the next frame is the expected recovery.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Sink(_))
    }
}
