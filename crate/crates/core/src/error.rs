use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("gate acts on {expected} qubits but {got} indices were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error("duplicate qubit index {0} in gate operands")]
    DuplicateQubit(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported qubit count {0}")]
    UnsupportedQubitCount(usize),
    #[error("expected {expected} parameters, got {got}")]
    ParamLength { expected: usize, got: usize },
    #[error("invalid coupling map: {0}")]
    InvalidCoupling(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("circuit is not in Clifford+T form: {0}")]
    NotCliffordT(String),
    #[error("target state is not normalized (norm² = {0})")]
    UnnormalizedState(f64),
    #[error("qasm line {line}: {message}")]
    Qasm { line: usize, message: String },
    #[error("unknown target '{0}'")]
    UnknownTarget(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite loss encountered")]
    NonFiniteLoss,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
