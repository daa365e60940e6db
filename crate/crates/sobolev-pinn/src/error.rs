//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by jets, tapes, networks, losses, solvers and the trainer.
#[derive(Debug, Error)]
pub enum Error {
    /// An input vector or multi-index has the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A derivative of total order above the supported maximum was requested.
    #[error("unsupported derivative order {order} (maximum supported is {max})")]
    UnsupportedOrder { order: usize, max: usize },

    /// A requested jet entry is missing from the supplied `JetValue`.
    #[error("jet is missing the entry for multi-index {index}")]
    MissingJetEntry { index: String },

    /// A tape handle does not belong to this tape.
    #[error("invalid tape handle {handle} (tape has {len} nodes)")]
    InvalidHandle { handle: usize, len: usize },

    /// Gradient was requested on a tape without a registered parameter set.
    #[error("tape has no registered parameter set")]
    NoParams,

    /// A loss variant was applied to the wrong problem kind.
    #[error("loss variant {variant} is not compatible with problem kind {kind}")]
    IncompatibleVariant { variant: String, kind: String },

    /// The operation is undefined for this problem kind.
    #[error("operation not supported for problem {problem}: {what}")]
    Unsupported { problem: String, what: String },

    /// Unknown catalog name.
    #[error("unknown problem name {name:?}; known names: {known}")]
    UnknownProblem { name: String, known: String },

    /// Invalid architecture description.
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    /// A numeric quantity that must be finite was not.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    /// Configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An explicit time-stepping stability bound was violated.
    #[error("CFL violation: {n_t} steps are too few for this grid, use at least {suggested}")]
    CflViolation { n_t: usize, suggested: usize },

    /// File input/output failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    /// A malformed data file.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
