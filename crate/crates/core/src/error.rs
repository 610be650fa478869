use thiserror::Error;

use crate::utility::Degeneracy;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front-ends to pick exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input file or document.
    Input,
    /// Well-formed input that cannot be evaluated as requested.
    Semantic,
    /// A configured resource cap was exceeded.
    Capacity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dataset has no individuals")]
    EmptyDataset,
    #[error("individual {id:?}: {reason}")]
    InvalidIndividual { id: String, reason: String },
    #[error("duplicate id {id:?}")]
    DuplicateIdentifier { id: String },
    #[error("no threshold for group {0:?}")]
    MissingGroupThreshold(String),
    #[error("threshold for unknown group {0:?}")]
    UnknownGroup(String),
    #[error("threshold {0} outside [0, 1.01]")]
    ThresholdOutOfRange(f64),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid utility spec: {0}")]
    InvalidUtilitySpec(String),
    #[error("degenerate utility spec: {0} is optimal")]
    DegenerateSpec(Degeneracy),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {attribute:?} cannot be compared with {op}")]
    IncomparableAttribute { attribute: String, op: String },
    #[error("relevant position {0:?} has no claim-holding individuals")]
    EmptyPosition(String),
    #[error("fairness analysis needs at least 2 groups, found {0}")]
    TooFewGroups(usize),
    #[error("prioritarian weights: expected {expected}, got {actual}")]
    WeightLengthMismatch { expected: usize, actual: usize },
    #[error("prioritarian weights are all zero")]
    AllZeroWeights,
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid grid range: {0}")]
    InvalidRange(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sweep of {size} rules exceeds cap {cap}")]
    SweepTooLarge { size: u128, cap: u64 },
    #[error("sweep result is empty")]
    EmptySweep,

    #[error("file is empty")]
    EmptyFile,
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("duplicate column mapping {0:?}")]
    DuplicateColumn(String),
    #[error("row {row}, column {column:?}: score {value:?} is not a number in [0, 1]")]
    BadScore {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column:?}: outcome {value:?} is not 0 or 1")]
    BadOutcome {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column:?}: amount {value:?} is not a non-negative number")]
    BadAmount {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column:?}: duplicate id {value:?}")]
    DuplicateId {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: {reason}")]
    Csv { row: usize, reason: String },
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            EmptyFile
            | MissingColumn(_)
            | DuplicateColumn(_)
            | BadScore { .. }
            | BadOutcome { .. }
            | BadAmount { .. }
            | DuplicateId { .. }
            | Csv { .. }
            | SchemaViolation { .. }
            | EmptyDataset
            | InvalidIndividual { .. }
            | DuplicateIdentifier { .. } => ErrorClass::Input,
            SweepTooLarge { .. } => ErrorClass::Capacity,
            _ => ErrorClass::Semantic,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            EmptyDataset => "EmptyDataset",
            InvalidIndividual { .. } => "InvalidIndividual",
            DuplicateIdentifier { .. } => "DuplicateIdentifier",
            MissingGroupThreshold(_) => "MissingGroupThreshold",
            UnknownGroup(_) => "UnknownGroup",
            ThresholdOutOfRange(_) => "ThresholdOutOfRange",
            LengthMismatch { .. } => "LengthMismatch",
            InvalidUtilitySpec(_) => "InvalidUtilitySpec",
            DegenerateSpec(_) => "DegenerateSpec",
            UnknownAttribute(_) => "UnknownAttribute",
            IncomparableAttribute { .. } => "IncomparableAttribute",
            EmptyPosition(_) => "EmptyPosition",
            TooFewGroups(_) => "TooFewGroups",
            WeightLengthMismatch { .. } => "WeightLengthMismatch",
            AllZeroWeights => "AllZeroWeights",
            InvalidPattern(_) => "InvalidPattern",
            InvalidRange(_) => "InvalidRange",
            InvalidGrid(_) => "InvalidGrid",
            SweepTooLarge { .. } => "SweepTooLarge",
            EmptySweep => "EmptySweep",
            EmptyFile => "EmptyFile",
            MissingColumn(_) => "MissingColumn",
            DuplicateColumn(_) => "DuplicateColumn",
            BadScore { .. } => "BadScore",
            BadOutcome { .. } => "BadOutcome",
            BadAmount { .. } => "BadAmount",
            DuplicateId { .. } => "DuplicateId",
            Csv { .. } => "Csv",
            SchemaViolation { .. } => "SchemaViolation",
        }
    }

    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
