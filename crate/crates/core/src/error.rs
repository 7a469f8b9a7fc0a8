use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profile does not decay below {tol:e} at rmax (|u(rmax)| = {value:e})")]
    InsufficientDecay { tol: f64, value: f64 },

    #[error("lifted profile does not fit the box: {0}")]
    ProfileOutsideBox(String),

    #[error("cannot project onto the Nehari manifold: B(u^2,u^2) = {0:e} <= 0")]
    NotProjectable(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { what: String, iterations: usize, residual: f64, trace: Vec<f64> },

    #[error("ground state lost positivity at r = {0}")]
    LossOfPositivity(f64),

    #[error("contraction failed at iteration {iteration}: update ratio {ratio} >= 1 repeatedly")]
    ContractionFailure { iteration: usize, ratio: f64, trace: Vec<f64> },

    #[error("linear solve stagnated: {0}")]
    LinearSolveFailure(String),

    #[error("degenerate basis: Gram determinant {0:e}")]
    DegenerateBasis(f64),

    #[error("minimum lies on the boundary of the sampled grid at index ({0}, {1})")]
    BoundaryMinimum(usize, usize),

    #[error("incomplete sweep: failed for eps = {0:?}")]
    IncompleteSweep(Vec<f64>),

    #[error("resolution guard: {0}")]
    Resolution(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
