//! Error types, one enum per pipeline stage.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed record: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("line {line}: unknown action {action:?}")]
    UnknownAction { line: usize, action: String },
    #[error("line {line}: non-positive duration {duration}")]
    NonPositiveDuration { line: usize, duration: i64 },
    #[error("line {line}: duplicate comment id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("user {0} has no authored comments")]
    NoAuthoredComments(String),
    #[error("user {0} has no block span")]
    NoBlockSpan(String),
    #[error("user {0}: first block span has no finite end")]
    IndefiniteFirstSpan(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cutoff {cutoff} is not after first activity {first_activity}")]
    CutoffBeforeFirstActivity { cutoff: i64, first_activity: i64 },
    #[error("block span has no finite end")]
    IndefiniteSpan,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("degenerate table: a row or column sums to zero")]
    DegenerateTable,
    #[error("empty sample")]
    EmptySample,
    #[error("empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no rows to evaluate")]
    EmptyDataset,
    #[error("no feature input for paired user {0}")]
    MissingFeature(String),
    #[error("training labels contain a single class")]
    DegenerateInput,
    #[error("hyperparameter grid is empty")]
    GridEmpty,
    #[error("too few rows for evaluation: {0}")]
    TooFewRows(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}
