use thiserror::Error;

/// Errors raised by the evaluators and the lifting machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a domain invariant (wrong dimension, off the sphere, out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampled precondition failed; `witness` describes the offending sample.
    #[error("precondition failed: {what} (witness: {witness})")]
    Precondition { what: String, witness: String },

    /// A lift oracle failed while processing the cell with the given index.
    #[error("lift oracle failed at cell {cell}: {source}")]
    Oracle {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    /// A numerical inversion or search did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed instance or expression text.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(what: impl Into<String>, witness: impl Into<String>) -> Self {
        Error::Precondition {
            what: what.into(),
            witness: witness.into(),
        }
    }
}
