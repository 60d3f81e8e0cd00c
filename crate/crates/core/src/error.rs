use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters or configuration.
    Config,
    /// Malformed or inconsistent input data.
    Data,
    /// A numerical procedure could not produce an answer.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {need} anchors, got {got}")]
    TooFewAnchors { need: usize, got: usize },
    #[error("degenerate anchor geometry: anchors are collinear")]
    DegenerateGeometry,
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal is empty")]
    EmptySignal,
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("trilateration anchors are collinear")]
    CollinearAnchors,
    #[error("spheres do not intersect (residual {residual:e})")]
    NoIntersection { residual: f64 },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("bias-corrected information matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds training set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed number {value:?} at row {row}, column `{column}`")]
    MalformedNumber { row: usize, column: String, value: String },
    #[error("location label `{0}` has no zone mapping")]
    UnmappedLocation(String),
    #[error("malformed zone mapping at line {line}: {reason}")]
    MalformedZoneMapping { line: usize, reason: String },
    #[error("unsupported model format: {0}")]
    ModelFormat(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter { .. }
            | ZeroWindow
            | NonPositiveSigma(_)
            | KTooLarge { .. }
            | DegenerateGeometry => ErrorClass::Config,
            CollinearAnchors
            | NoIntersection { .. }
            | RankDeficient
            | NotPositiveDefinite => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
