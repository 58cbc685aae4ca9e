use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported Laplacian exponent {0} (expected -1, 1 or 2)")]
    UnsupportedExponent(i32),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("spectrum is not conjugate-symmetric (imaginary residue {residue:.3e} > {bound:.3e})")]
    SymmetryViolation { residue: f64, bound: f64 },

    #[error("derivative order {0} is not available (max 3)")]
    DerivativeOrder(u32),

    #[error("preconditioner symbol is not positive at k^2 = {k2} (sigma = {sigma:.6e})")]
    IndefinitePreconditioner { k2: f64, sigma: f64 },

    #[error("nonlinear solver did not converge in {iterations} iterations (|d|_inf = {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear solve is singular at k^2 = {k2}")]
    SingularSystem { k2: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("run aborted at t = {t}: {reason}")]
    RunAborted { t: f64, reason: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
