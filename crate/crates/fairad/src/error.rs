use thiserror::Error;

/// Errors raised by the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("node {0} has zero degree; the normalized Laplacian is singular (run the largest-connected-component pass first)")]
    ZeroDegree(usize),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("solver did not converge within {iters} iterations (relative residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("clustering degeneracy: {0}")]
    Degenerate(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a validation (usage) error rather than a
    /// runtime failure. CLI exit codes key off this.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
