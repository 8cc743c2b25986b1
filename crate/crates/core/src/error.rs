use thiserror::Error;

/// Failures of the dense linear and nonlinear solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("matrix is numerically singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("Jacobian is singular at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("residual is not finite at Newton iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stage count {0}; at least 2 stages are required")]
    InvalidStageCount(usize),
    #[error("degenerate Lagrange basis: nodes {0} and {1} coincide")]
    DegenerateBasis(usize, usize),
    #[error("symplectic conjugate undefined: weight b[{0}] vanishes")]
    ConjugateUndefined(usize),
    #[error("stability function has no finite limit at infinity")]
    LimitUndefined,
    #[error("tableau violates hypothesis {0}")]
    HypothesisViolation(&'static str),
    #[error("{0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("inverse Legendre transform failed: {0}")]
    Regularity(SolveError),
    #[error("constraint compatibility matrix is singular")]
    Compatibility,
    #[error("initial state violates the constraints (residual {0:e})")]
    InconsistentInitialState(f64),
    #[error("argument outside the retraction domain")]
    RetractionDomain,
    #[error("step size too large: algebra increment norm {0:.3e} exceeds 1")]
    StepTooLarge(f64),
    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
