//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    AsciiParse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("distance transform needs at least one source cell")]
    NoSourceCells,

    #[error("no stream cells at accumulation threshold of {threshold_cells} cells")]
    NoStreams { threshold_cells: u64 },

    #[error("expected a {expected} flow field")]
    FlowMode { expected: &'static str },

    #[error("judgment matrix rejected: {0}")]
    BadJudgment(String),

    #[error("weight solver did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("natural breaks need at least {need} distinct values, found {found}")]
    TooFewDistinct { need: usize, found: usize },

    #[error("value {value} exceeds the top class bound {bound}; scheme has no open top class")]
    ValueOutOfRange { value: f64, bound: f64 },

    #[error("unmapped category code {code} ({cells} cells)")]
    UnmappedCategory { code: i64, cells: usize },

    #[error("invalid rating scheme: {0}")]
    BadScheme(String),

    #[error("validation masks overlap: {0}")]
    MaskOverlap(String),

    #[error("ground-truth flood mask is empty after exclusion")]
    NoGroundTruth,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost cause, unwrapping any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
