use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("register of {0} qubits exceeds the simulator cap of {max} qubits", max = crate::qsim::MAX_QUBITS)]
    RegisterTooLarge(usize),

    #[error("keep set must not be empty")]
    EmptyKeep,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("Kraus operators are not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("invalid Pauli channel: {0}")]
    InvalidChannel(String),

    #[error("unknown noise channel name `{0}`")]
    UnknownChannel(String),

    #[error("unknown code id `{0}`")]
    UnknownCode(String),

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("invalid ansatz: {0}")]
    InvalidAnsatz(String),

    #[error("parameter vector has length {found}, layout expects {expected}")]
    ParameterLength { expected: usize, found: usize },

    #[error("fidelity {0} outside [0, 1]")]
    FidelityOutOfRange(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("target infidelity {0:e} not reached")]
    TargetUnreached(f64),

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
