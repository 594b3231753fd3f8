//! Error taxonomy shared by every stage of the identification pipeline.
//!
//! The variants separate caller mistakes (invalid arguments, violated
//! preconditions, bad configs) from data-dependent failures (numerical
//! breakdown, divergence, degenerate measurements) so that callers can decide
//! what is retryable.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is malformed regardless of the data it will touch.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical procedure broke down; the message carries the diagnostic.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Time integration left the trusted region.
    #[error("trajectory diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    /// Measured data carries too little information to continue.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A moment of the requested order cannot be recovered for this coupling.
    #[error("moment recursion infeasible at order {k}: {detail}")]
    InfeasibleAt { k: usize, detail: String },

    /// The experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage needs an artifact that is not on disk.
    #[error("missing artifact: expected {0}")]
    MissingArtifact(PathBuf),

    /// A stored artifact exists but cannot be parsed.
    #[error("failed to parse {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    /// A named pipeline stage failed; wraps the underlying error.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tags an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
