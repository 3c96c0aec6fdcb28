//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An enumeration or table would exceed the configured cap.
    #[error("sizing: {what} needs {needed} entries, cap is {cap}")]
    Sizing {
        what: String,
        needed: u128,
        cap: u128,
    },

    /// A probability table or conditional does not sum to one.
    #[error("normalization: {what} sums to {sum}, tolerance {tolerance}")]
    Normalization {
        what: String,
        sum: f64,
        tolerance: f64,
    },

    /// `q` assigns zero probability where `p` does not.
    #[error("support: document {document} has p > 0 but q = 0")]
    Support { document: String },

    /// A conditional was requested on a prefix of zero probability.
    #[error("undefined conditional: prefix {prefix} has zero marginal")]
    ZeroMarginal { prefix: String },

    /// Arguments outside an operation's domain.
    #[error("domain: {0}")]
    Domain(String),

    /// An arithmetic precondition of a construction or bound failed.
    #[error("precondition: {0}")]
    Precondition(String),

    /// A reciprocal denominator evaluated to zero during a step.
    #[error("reciprocal by zero at node {node} (step {step})")]
    ReciprocalByZero { node: usize, step: u64 },

    /// A node left its declared value domain during execution.
    #[error("node {node} took value {value} outside its declared domain at step {step}")]
    ValueDomain { node: usize, value: f64, step: u64 },

    /// A graph violates a structural invariant.
    #[error("invariant: {0}")]
    Invariant(String),

    /// Malformed input file; `pointer` is a JSON pointer into the document.
    #[error("schema at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in structured CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Sizing { .. } => "sizing",
            Error::Normalization { .. } => "normalization",
            Error::Support { .. } => "support",
            Error::ZeroMarginal { .. } => "zero_marginal",
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::ReciprocalByZero { .. } => "reciprocal_by_zero",
            Error::ValueDomain { .. } => "value_domain",
            Error::Invariant(_) => "invariant",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
