use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum SstError {
    #[error("record length {length} is not a multiple of the window length {window_length}")]
    NonDivisibleLength { length: usize, window_length: usize },

    #[error("window_seconds x sample_rate = {product} is not an integer")]
    NonIntegralWindow { product: f64 },

    #[error("missing window index {index} for channel {channel}")]
    MissingWindow { channel: usize, index: usize },

    #[error("segment length {segment} exceeds record length {record}")]
    SegmentTooLong { segment: usize, record: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("only {segments} averaged segment(s); coherence needs at least 2")]
    TooFewSegments { segments: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("window set has {count} window(s); need at least {needed}")]
    TooFewWindows { count: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown element index {index} (model has {count} elements)")]
    UnknownElement { index: usize, count: usize },

    #[error("time integration produced a non-finite value at step {step}")]
    UnstableIntegration { step: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("non-finite loss at iteration {iteration} ({which})")]
    NonFiniteLoss { iteration: usize, which: String },

    #[error("training domain '{0}' is empty")]
    DomainEmpty(String),

    #[error("state mismatch: source is {found}, scenario expects {expected}")]
    StateMismatch { expected: String, found: String },

    #[error("zero vector passed where a nonzero mode shape is required")]
    ZeroVector,

    #[error("reference frequency must be positive, got {0}")]
    NonPositiveReference(f64),

    #[error("too few samples: {have}, need at least {need}")]
    TooFewSamples { have: usize, need: usize },

    #[error("non-finite sample encountered")]
    NonFiniteSample,

    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad file format in {path}: {reason}")]
    BadFormat { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, SstError>;

impl SstError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SstError::IoFailure {
            path: path.into(),
            source,
        }
    }

    /// Process exit code per the CLI contract: 2 validation, 3 numeric, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        use SstError::*;
        match self {
            IoFailure { .. } | BadFormat { .. } => 4,
            UnstableIntegration { .. } | NonFiniteLoss { .. } | SingularSystem(_)
            | NonFiniteSample => 3,
            _ => 2,
        }
    }
}
