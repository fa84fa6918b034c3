//! Crate-wide error type.

/// Errors produced by samplers, boundary tables, and file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A finite sample source ran out of indicators before a decision.
    #[error("sample source exhausted after {draws} draws")]
    SourceExhausted { draws: u64 },

    /// A precomputed boundary table does not cover a requested step.
    #[error(
        "boundary table covers {available} steps but step {needed} is required; \
         extend the table to at least {needed} steps"
    )]
    BoundariesExhausted { available: u64, needed: u64 },

    /// A file did not match the expected grammar.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Loaded or constructed boundary data violates a structural invariant.
    #[error("boundary invariant violated: {0}")]
    InvariantViolation(String),

    /// A boundary file declares an unsupported format version.
    #[error("unsupported boundary file version `{found}`")]
    VersionMismatch { found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
