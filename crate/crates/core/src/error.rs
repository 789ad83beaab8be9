use thiserror::Error;

/// Errors raised by the numeric kernels, losses, verifiers and trainers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("row {0} has (near) zero norm")]
    ZeroNormRow(usize),

    #[error("class {0} has no members")]
    EmptyClass(usize),

    #[error("label {label} at position {index} is outside [0, {num_classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("row {row} is not a probability vector (sum = {sum})")]
    NotProbability { row: usize, sum: f64 },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap}")]
    Asymmetric { i: usize, j: usize, gap: f64 },

    #[error("Jacobi eigensolver did not converge in {0} sweeps")]
    NoConvergence(usize),

    #[error("lambda-degenerate: lambda = {0}")]
    LambdaDegenerate(f64),

    #[error("sample {0} has no positive partner")]
    NoPositive(usize),

    #[error("query {0} lacks positives or negatives")]
    QueryLacksPairs(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("means-too-crowded: rejection sampling gave up after {0} attempts")]
    MeansTooCrowded(usize),

    /// Carries the trace up to the last finite epoch.
    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        trace: Box<crate::train::TrainTrace>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
