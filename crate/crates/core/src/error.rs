use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("(A, B) is not stabilizable (PBH test fails at eigenvalue {re:.6} + {im:.6}i)")]
    NotStabilizable { re: f64, im: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    NonConvergent { iterations: usize },

    #[error("state {0} lies outside the state constraint set")]
    InfeasibleParameter(String),

    #[error("constraint set is empty (minimum total violation {violation:.3e})")]
    Infeasible { violation: f64 },

    #[error("active-set solver hit the iteration cap ({0})")]
    MaxIterations(usize),

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("linear system (2M + rho I) is singular")]
    SingularSystem,

    #[error("fixed-point iteration cap {cap} reached with residual {residual:.3e}")]
    CapExceeded { cap: usize, residual: f64 },

    #[error("polytope row {0} has a zero normal")]
    DegenerateRow(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
