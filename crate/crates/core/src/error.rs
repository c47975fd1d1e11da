use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QerError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("operator is not an isometry (deviation {deviation:.3e})")]
    NotIsometry { deviation: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigNoConvergence { iterations: usize, residual: f64 },

    #[error("SDP solver did not converge after {iterations} iterations (gap {gap:.3e}, primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e})")]
    SdpNoConvergence {
        iterations: usize,
        gap: f64,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("channel is not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("Kraus element count {count} exceeds cap {cap}")]
    ElementCap { count: usize, cap: usize },

    #[error("invalid stabilizer code: {0}")]
    Stabilizer(String),

    #[error("Pauli decomposition residual {residual:.3e} exceeds tolerance")]
    PauliDecomposition { residual: f64 },

    #[error("numerical integrity violation: {0}")]
    Numerical(String),

    #[error("not a partition of the code space: {0}")]
    Partition(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, QerError>;

impl From<std::io::Error> for QerError {
    fn from(e: std::io::Error) -> Self {
        QerError::Io(e.to_string())
    }
}

impl From<csv::Error> for QerError {
    fn from(e: csv::Error) -> Self {
        QerError::Io(e.to_string())
    }
}
