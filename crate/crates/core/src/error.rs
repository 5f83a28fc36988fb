use thiserror::Error;

/// Errors produced by the solver, the oracle and the I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} out of range (1..=63)")]
    QubitCount(usize),

    #[error("basis state {value} does not fit in {n} qubits")]
    StateOutOfRange { value: u64, n: usize },

    #[error("invalid pauli word {word:?}: {reason}")]
    PauliWord { word: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("dense matrix requested for {0} qubits, limit is 12")]
    DenseTooLarge(usize),

    #[error("exact oracle supports at most 20 qubits, got {0}")]
    OracleTooLarge(usize),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("contamination rate {0} outside [0, 1]")]
    ContaminationRate(f64),

    #[error("counts key {key:?}: {reason}")]
    CountsKey { key: String, reason: String },

    #[error("empty subspace")]
    EmptySubspace,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
