use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible or unsupported dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A register would exceed the configured qubit cap.
    #[error("size error: requested {requested} qubits exceeds cap of {cap} (set TDSIM_MAX_QUBITS to raise)")]
    QubitCap { requested: usize, cap: usize },

    /// An argument violates a precondition.
    #[error("argument error: {0}")]
    Argument(String),

    /// Input outside the valid numeric domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative construction failed to certify within its escalation cap.
    #[error("construction error: {0}")]
    Construction(String),

    /// A contraction could not be completed to a unitary.
    #[error("dilation error: {0}")]
    Dilation(String),

    /// Requested accuracy unreachable for the given profile.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Operation not supported for this representation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Generated object failed its declared invariants.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
