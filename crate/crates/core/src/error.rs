use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("state matrix is not Schur stable: {0}")]
    Unstable(String),

    #[error("pair {{C, A}} is not observable (singular value ratio {ratio:e})")]
    NotObservable { ratio: f64 },

    #[error("no stabilizing Riccati solution after {iterations} iterations: {reason}")]
    NoStabilizingSolution { reason: String, iterations: usize },

    #[error("problem is not suboptimal: {0}")]
    Infeasible(String),

    #[error("Gram defect has rank {found}, expected {expected}")]
    RankDefect { expected: usize, found: usize },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("parameter contract violated: {0}")]
    ContractViolation(String),

    #[error("theory check failed: {0}")]
    TheoryViolation(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("invalid problem data: {0}")]
    InvalidData(String),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    /// True for the failures that indicate the data lies outside the
    /// suboptimal regime rather than a defect in the input or the numerics.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::NoStabilizingSolution { .. })
    }
}
