use thiserror::Error;

use crate::fourierlog::ErrorCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("matrix is not Hermitian (max |m_ij - conj(m_ji)| = {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("function undefined at eigenvalue {eigenvalue}")]
    Domain { eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("infeasible ansatz parameters: {0}")]
    InfeasibleParameters(String),

    #[error(
        "series certificate failed: max error {:e} exceeds target {:e} on a {}-point grid",
        .0.max_error, .0.target_eps, .0.grid_size
    )]
    CertificateFailed(Box<ErrorCertificate>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("objective returned non-finite value {value} (coordinate {coordinate:?})")]
    NonFinite {
        value: f64,
        coordinate: Option<usize>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
