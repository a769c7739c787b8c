use std::io;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unbound predicate")]
    UnboundPredicate,
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
}

/// Failure to read one of the textual formats (triples, queries, logs,
/// BGP documents).
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ParseError {
    pub fn line(line: usize, reason: impl Into<String>) -> Self {
        ParseError::Line {
            line,
            reason: reason.into(),
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, ParseError::Io(_))
    }
}

/// Invalid parameters for the pipeline or the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid gap `{0}`")]
    InvalidGap(String),
    #[error("gap must be positive")]
    NonPositiveGap,
    #[error("slice length must be positive")]
    NonPositiveSlice,
    #[error("slice length {slice} is shorter than the gap {gap}")]
    SliceShorterThanGap { slice: String, gap: String },
    #[error("{0}")]
    Invalid(String),
}
