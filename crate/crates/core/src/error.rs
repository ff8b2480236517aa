use thiserror::Error;

use crate::types::Label;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("group size {0} outside the supported range 2..=26")]
    SizeOutOfRange(usize),
    #[error("ground truth has {got} scores for {expected} candidates")]
    GroundTruthLengthMismatch { expected: usize, got: usize },
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("label {0} appears more than once")]
    DuplicateLabel(Label),
    #[error("score {0} outside [0, {1}]")]
    ScoreOutOfRange(i64, i64),
    #[error("empty input")]
    EmptyInput,
    #[error("label sets differ")]
    LabelSetMismatch,
    #[error("no ranking line found")]
    MissingRanking,
    #[error("no score map found")]
    MissingScores,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("group of size {0} is too small (need at least 2)")]
    GroupTooSmall(usize),
    #[error("reward {value} outside the declared range [0, {max}]")]
    RewardOutOfDeclaredRange { value: f64, max: f64 },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid length-penalty config: max_len={max_len}, buffer={buffer}")]
    InvalidBufferConfig { max_len: usize, buffer: usize },
    #[error("group has no ground truth")]
    MissingGroundTruth,
    #[error("cannot subsample {k} of {size} candidates")]
    InvalidSubsampleSize { k: usize, size: usize },
    #[error("pool has {0} outputs, need at least 2")]
    PoolTooSmall(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid moving-average window {0}")]
    InvalidWindow(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: invalid JSON: {msg}")]
    JsonSyntax { line: usize, msg: String },
    #[error("line {line}: schema violation in `{field}`: {msg}")]
    SchemaViolation { line: usize, field: String, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
