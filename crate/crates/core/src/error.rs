use thiserror::Error;

/// Errors produced by state construction, protocol preconditions and
/// parameter validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary (max |U\u{2020}U - I| = {max_dev:.3e})")]
    NonUnitary { max_dev: f64 },

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("state of {requested} qubits exceeds the dense-simulation cap of {max}")]
    TooManyQubits { requested: usize, max: usize },

    #[error("invalid measurement basis: {0}")]
    InvalidBasis(String),

    #[error("forced measurement branch has zero probability")]
    ImpossibleBranch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{name} = {value} outside allowed range [{min}, {max}]")]
    OutOfRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("unsupported probe phase index {0} (supported: 0, \u{b1}1, \u{b1}2, \u{b1}3)")]
    UnsupportedPhaseIndex(i32),

    #[error("circuit parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
