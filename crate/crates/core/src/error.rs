use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("symbol {symbol} out of range for coordinate {coord} (alphabet size {size})")]
    SymbolOutOfRange { coord: usize, symbol: usize, size: usize },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid probability vector for coordinate {coord}: {reason}")]
    InvalidMarginal { coord: usize, reason: String },

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("set is empty")]
    EmptySet,

    #[error("{what} = {value} is outside its domain {domain}")]
    OutOfDomain { what: &'static str, value: f64, domain: &'static str },

    #[error("enumeration of {size} points exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u64 },

    #[error("oracle size cap exceeded: {0}")]
    OracleCap(String),

    #[error("certificate undefined: distance is zero")]
    CertificateUndefined,

    #[error("cross-section for symbol {0} is empty")]
    EmptyCrossSection(usize),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
