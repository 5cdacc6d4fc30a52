//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by lattice, pseudolattice and verification routines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Matrix or vector shapes do not fit together.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A Gram matrix expected to be symmetric is not.
    #[error("matrix is not symmetric")]
    NotSymmetric,
    /// The operation needs a nondegenerate form.
    #[error("form is degenerate: {0}")]
    Degenerate(String),
    /// The operation needs a unimodular form or map.
    #[error("not unimodular: {0}")]
    NotUnimodular(String),
    /// The operation needs a definite form.
    #[error("form is indefinite: {0}")]
    Indefinite(String),
    /// A vector or sublattice fails a primitivity requirement.
    #[error("not primitive: {0}")]
    NotPrimitive(String),
    /// A standard lattice name could not be parsed.
    #[error("unknown lattice name `{0}`")]
    UnknownLattice(String),
    /// A Kodaira fibre tag could not be parsed.
    #[error("unknown fibre type `{0}`")]
    UnknownFibre(String),
    /// A precondition of the named operation is violated.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A bounded search gave up without a certificate either way.
    #[error("search exhausted its budget: {0}")]
    Budget(String),
    /// Malformed input data (JSON, names, shapes).
    #[error("invalid input: {0}")]
    Input(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
