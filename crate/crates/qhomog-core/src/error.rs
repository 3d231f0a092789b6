use thiserror::Error;

/// Errors raised anywhere in the emulator, circuit builders or oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("impossible outcome: projector has zero probability")]
    ImpossibleOutcome,
    #[error("fitting error: {0}")]
    Fit(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("lowering error: unsupported gate {0}")]
    Lowering(String),
    #[error("excluded mode: the zero frequency has no Green's operator")]
    ExcludedMode,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty physical branch: selected mass {0:e} below threshold")]
    EmptyPhysicalBranch(f64),
    #[error("qubit budget exceeded: {required} qubits required, cap is {cap}")]
    QubitBudget { required: usize, cap: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("index {k} out of range for grid size {n}")]
    IndexOutOfRange { k: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
