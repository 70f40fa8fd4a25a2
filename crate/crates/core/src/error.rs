use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("basis mismatch between operator and state")]
    BasisMismatch,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("expectation value has imaginary residue {0:e} for a Hermitian operator")]
    ImaginaryResidue(f64),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("truncation discards probability mass {mass:e} (limit {limit:e})")]
    Truncation { mass: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("descriptor parse error at column {pos}: {msg}")]
    Descriptor { pos: usize, msg: String },
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
