use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into two families that map onto the CLI exit codes:
/// input/format problems (exit 2) and computation/validation problems (exit 3).
#[derive(Debug, Error)]
pub enum IqError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at {location}: {reason}")]
    Format { location: String, reason: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("label count {labels} does not match row count {rows}")]
    LabelCountMismatch { labels: usize, rows: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),

    #[error("embedding set is not unit-normalized")]
    NotNormalized,

    #[error("retrieval pool needs at least 2 rows, got {0}")]
    EmptyPool(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty vector")]
    EmptyVector,

    #[error("no identity has at least {min_size} rows")]
    NoEligibleIdentity { min_size: usize },

    #[error("label noise needs at least 2 distinct identities")]
    SingleIdentity,

    #[error("spectrum has no positive mass")]
    AllZeroSpectrum,

    #[error("normalization cap Q = {0} is below 2")]
    DegenerateCap(usize),

    #[error("eigensolver did not converge after {0} iterations")]
    ConvergenceFailure(usize),

    #[error("fusion weights must be non-negative and sum to 1 (alpha = {alpha}, beta = {beta})")]
    WeightError { alpha: f64, beta: f64 },

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("scenario entry '{entry}': {source}")]
    Scenario {
        entry: String,
        #[source]
        source: Box<IqError>,
    },
}

impl IqError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IqError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(location: impl Into<String>, reason: impl Into<String>) -> Self {
        IqError::Format {
            location: location.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or unreadable input.
    pub fn is_input_error(&self) -> bool {
        match self {
            IqError::Io { .. }
            | IqError::Format { .. }
            | IqError::NonFiniteValue { .. }
            | IqError::LabelCountMismatch { .. } => true,
            IqError::Scenario { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    /// Process exit code for the command-line front end: 2 for input errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else {
            3
        }
    }

    /// Short machine-parseable tag naming the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            IqError::Io { .. } => "io",
            IqError::Format { .. } => "format",
            IqError::NonFiniteValue { .. } => "non_finite_value",
            IqError::LabelCountMismatch { .. } => "label_count_mismatch",
            IqError::Shape(_) => "shape",
            IqError::Config(_) => "config",
            IqError::ZeroNormRow(_) => "zero_norm_row",
            IqError::NotNormalized => "not_normalized",
            IqError::EmptyPool(_) => "empty_pool",
            IqError::LengthMismatch { .. } => "length_mismatch",
            IqError::EmptyVector => "empty_vector",
            IqError::NoEligibleIdentity { .. } => "no_eligible_identity",
            IqError::SingleIdentity => "single_identity",
            IqError::AllZeroSpectrum => "all_zero_spectrum",
            IqError::DegenerateCap(_) => "degenerate_cap",
            IqError::ConvergenceFailure(_) => "convergence_failure",
            IqError::WeightError { .. } => "weight_error",
            IqError::ZeroVariance(_) => "zero_variance",
            IqError::Scenario { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, IqError>;
