use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus: must be at least 2")]
    InvalidModulus,
    #[error("value is not invertible modulo the given modulus")]
    NotInvertible,
    #[error("prime size of {0} bits is too small (minimum 16)")]
    PrimeTooSmall(u64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported security level {0} bits (expected 80 or 112, or an explicit prime size)")]
    UnsupportedSecurity(u32),
    #[error("message exceeds the plaintext space")]
    MessageTooLarge,
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("negative scalars are not supported")]
    UnsupportedScalar,
    #[error("invalid ciphertext: {0}")]
    InvalidCiphertext(String),
    #[error("must have private key")]
    MissingPrivateKey,
    #[error("key fingerprint mismatch")]
    KeyMismatch,

    #[error("vector is constant; min-max normalization is undefined")]
    DegenerateVector,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("value {0} is negative or not finite")]
    NegativeValue(f64),
    #[error("precision must be between 1 and 50 digits, got {0}")]
    InvalidPrecision(u32),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("overflow risk: {0}")]
    OverflowRisk(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported key file format version {0}")]
    UnknownVersion(u64),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("malformed key file: {0}")]
    KeyFormat(String),
    #[error("key integrity check failed: {0}")]
    Integrity(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record `{id}`: {message}")]
    Record { id: String, message: String },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
