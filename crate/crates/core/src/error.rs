//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n must be an odd integer >= 9, got {0}")]
    InvalidModulus(u64),

    #[error("bit budget must satisfy Np >= 2 and Nq >= 2, got Np={np}, Nq={nq}")]
    InvalidLayout { np: u32, nq: u32 },

    #[error("{value} is not a valid factor for n={n}: {reason}")]
    InvalidFactor { n: u64, value: u64, reason: &'static str },

    #[error("factors do not multiply to n: {p} * {q} != {n}")]
    FactorMismatch { n: u64, p: u64, q: u64 },

    #[error("factors of the instance are unknown")]
    FactorsUnknown,

    #[error("label must have exactly {expected} bits, got {got}")]
    BadLabelLength { expected: u32, got: usize },

    #[error("label may only contain '0' and '1'")]
    BadLabelChar,

    #[error("{value} does not fit in {bits} bits")]
    BitBudgetExceeded { value: u64, bits: u32 },

    #[error("{value} must be odd")]
    EvenValue { value: u64 },

    #[error("enumeration window 2^{0} exceeds the supported range (max qubits 30)")]
    EnumerationTooLarge(u32),

    #[error("instance needs {required} qubits; only layouts up to {max} are supported here")]
    TooManyQubits { required: u32, max: u32 },

    #[error("coefficient overflow while expanding the cost polynomial for n={0}")]
    CoefficientOverflow(u64),

    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("state has {state_qubits} qubits but the instance needs {instance_qubits}")]
    DimensionMismatch { state_qubits: u32, instance_qubits: u32 },

    #[error("parameters must be finite")]
    NonFiniteParameter,

    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),

    #[error("fidelity threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),

    #[error("cannot take CVaR of an empty sample")]
    EmptySample,

    #[error("distribution mass sums to {0}, expected 1 within 1e-9")]
    NotNormalized(f64),

    #[error("standard error needs a tail of at least 2 entries, got {0}")]
    TailTooSmall(u64),

    #[error("shot count must be at least 1")]
    NoShots,

    #[error("alpha schedule must not be empty")]
    EmptySchedule,

    #[error("experiment grid is empty: {0}")]
    EmptyGrid(&'static str),

    #[error("this configuration is long-run scale ({0}); pass the long-run flag to proceed")]
    LongRunRequired(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an I/O error with the path it happened on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
