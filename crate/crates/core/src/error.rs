use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("key length {0} bits is not a positive multiple of 8")]
    KeyNotByteAligned(usize),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("circuit has {gates} gates but the universal machine holds at most {max}")]
    CircuitTooLarge { gates: usize, max: usize },

    #[error("register layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("unknown register {0:?}")]
    UnknownRegister(String),

    #[error("classical map is not injective on the state support")]
    NotInjective,

    #[error("register {0:?} is not zero in every basis term")]
    RegisterNotZero(String),

    #[error("dimension too large: {0}")]
    DimensionOverflow(String),

    #[error("wire {wire}: register segment matches neither key")]
    UnknownKey { wire: usize },

    #[error("gate {gate}: no table row verifies under the given keys")]
    NoRowMatch { gate: usize },

    #[error("gate {gate}: more than one table row verifies under the given keys")]
    AmbiguousRow { gate: usize },

    #[error("gate {gate}: backward table does not reproduce the input keys")]
    BackwardMismatch { gate: usize },

    #[error("synthesis failed: {0}")]
    Build(String),

    #[error("no nontrivial factor found")]
    NoFactor,

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("unsupported format version {0}")]
    Version(u8),

    #[error("checksum mismatch")]
    Checksum,

    #[error("truncated input")]
    Truncated,

    #[error("remote error: {0}")]
    Remote(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
