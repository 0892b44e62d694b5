use thiserror::Error;

/// Engine-wide error taxonomy.
///
/// * `Input` — malformed or inconsistent user data (bad manifest, non-prime
///   modulus, dimension mismatch, missing component).
/// * `Capability` — the request is well-formed but outside what the engine or
///   a provider ships (non-monomial symmetric action, provider range).
/// * `ComplexConsistency` — two maps that must compose to zero do not; this
///   points at a sign or structure bug upstream of the linear algebra.
/// * `Internal` — an invariant the engine itself guarantees was violated
///   (e.g. a right-hand side that should be a cocycle is not).
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("complex consistency error: {0}")]
    ComplexConsistency(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }
    pub fn complex(msg: impl Into<String>) -> Self {
        Error::ComplexConsistency(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
