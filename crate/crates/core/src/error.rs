use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is indefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteMatrix { min_eigenvalue: f64 },

    #[error("matrix is rank deficient (diagonal {index} = {value:.3e})")]
    RankDeficient { index: usize, value: f64 },

    #[error("measurement noise covariance is not diagonal (entry ({row}, {col}) = {value:.3e})")]
    NonDiagonalR { row: usize, col: usize, value: f64 },

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("{leaked:.3e} of the predicted mass falls outside the grid")]
    MassLeak { leaked: f64 },

    #[error("all likelihood values underflowed")]
    ZeroLikelihood,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
