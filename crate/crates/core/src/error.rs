use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("particle index {particle} out of range for a system with {n} environment particles")]
    ParticleOutOfRange { particle: usize, n: usize },

    #[error("expected {expected} basis labels, got {got}")]
    LabelCount { expected: usize, got: usize },

    #[error("environment size {0} exceeds the supported maximum of {max}", max = crate::model::MAX_ENVIRONMENT)]
    TooManyParticles(usize),

    #[error("invalid system specification: {0}")]
    InvalidSpec(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid control field: {0}")]
    InvalidField(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch { expected: usize, rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("density matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("Lie algebra not closed after {depth} commutator levels (dimension so far {dim})")]
    AlgebraNotClosed { dim: usize, depth: usize },

    #[error("minimization did not converge (gradient norm {grad_norm:e})")]
    NotConverged { grad_norm: f64 },

    #[error("operation requires a nonempty input")]
    EmptyInput,

    #[error("{what} is limited to n <= {max} environment particles (got {n})")]
    TooLarge { what: &'static str, n: usize, max: usize },
}
