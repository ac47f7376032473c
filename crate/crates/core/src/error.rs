use thiserror::Error;

/// Errors raised while building, proving or decoding verifiable dropout artifacts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid key material: {0}")]
    InvalidKey(String),

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("invalid dropout probability {p_num}/{p_den}: need p_den >= 1 and p_num < p_den")]
    InvalidProbability { p_num: u32, p_den: u32 },

    #[error("invalid scale {0}: must be at least 1")]
    InvalidScale(u32),

    #[error("non-finite activation at index {0}")]
    NonFinite(usize),

    #[error("shape {shape:?} does not describe {len} elements")]
    ShapeMismatch { shape: Vec<usize>, len: usize },

    #[error("length mismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unknown attestation backend `{0}`")]
    UnknownBackend(String),

    #[error("unsupported format version `{0}`")]
    UnsupportedVersion(String),

    #[error("malformed encoding: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
