//! Error type shared by every stage of the charting toolkit.

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("write failed after {offset} bytes: {source}")]
    Write { offset: u64, source: io::Error },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated input in {location}: expected {expected} bytes, found {actual}")]
    Truncated {
        location: String,
        expected: u64,
        actual: u64,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("config line {line}: {message} (`{text}`)")]
    Config {
        line: usize,
        text: String,
        message: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("channel {index} has zero norm")]
    ZeroNorm { index: usize },
    #[error("phase undefined: channels are orthogonal")]
    PhaseUndefined,
    #[error("neighborhood graph is disconnected (component sizes {sizes:?})")]
    Disconnected { sizes: Vec<usize> },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("data rank below requested dimension {dim}")]
    RankDeficient { dim: usize },
    #[error("invalid neighborhood size K={k} for N={n}")]
    InvalidK { k: usize, n: usize },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

/// Pipeline stage labels used when propagating errors out of `chart_channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Distance,
    Graph,
    Geodesics,
    Mds,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Distance => "distance",
            Stage::Graph => "graph",
            Stage::Geodesics => "geodesics",
            Stage::Mds => "mds",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
