use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },

    #[error("{what} on {n} qubits exceeds the cap of {cap}")]
    SizeCap {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pauli {pauli} is not compatible with measurement basis {basis}")]
    Incompatible { pauli: String, basis: String },

    /// No measurement setting of the dataset can inform the requested observable.
    #[error("no data for {observable}: {compatible} of {settings} settings are compatible")]
    NoData {
        observable: String,
        settings: usize,
        compatible: usize,
    },

    /// An estimate that must be positive came out nonpositive; the derived value is withheld.
    #[error("{quantity} estimate {value} is not positive; derived value withheld")]
    NonPositive { quantity: String, value: f64 },

    #[error("malformed dataset: {0}")]
    Malformed(String),

    #[error("unsupported schema {found:?}, expected {expected:?}")]
    SchemaVersion { found: String, expected: String },

    #[error("dataset invariant violated: {0}")]
    Invariant(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
