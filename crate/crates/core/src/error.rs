use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have dimension at least 1")]
    EmptyMatrix,
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("function value is not finite at eigenvalue {at}")]
    NonFiniteValue { at: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("Schatten exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("declared Lipschitz constant {declared} of `{name}` violated: observed slope {observed}")]
    LipschitzViolated {
        name: String,
        declared: f64,
        observed: f64,
    },
    #[error("spectrum lower bound violated: eigenvalue {eigenvalue} < rho = {rho}")]
    LowerBoundViolated { eigenvalue: f64, rho: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported spatial dimension {0}; only d = 1 is implemented")]
    UnsupportedDimension(usize),
    #[error("no Poincare inequality: the Dirichlet set is empty")]
    NoPoincare,
    #[error("form bound `{check}` violated by {margin:e} on probe {probe}")]
    BoundViolated {
        check: String,
        probe: usize,
        margin: f64,
    },
    #[error("shift {shift} lies inside the spectrum (lowest eigenvalue {lowest})")]
    ShiftInsideSpectrum { shift: f64, lowest: f64 },
    #[error("trace overflow while evaluating the occupation function")]
    Overflow,
    #[error("could not bracket the Fermi level after {doublings} doublings")]
    BracketFailure { doublings: usize },
    #[error("ball radius {radius} is smaller than the required radius {required}")]
    RadiusTooSmall { radius: f64, required: f64 },
    #[error("step ratio {observed} exceeds contraction bound {bound} at iteration {iteration}")]
    NonContraction {
        iteration: usize,
        observed: f64,
        bound: f64,
    },
    #[error("iterate {iteration} left the ball: norm {norm} > radius {radius}")]
    BallEscape {
        iteration: usize,
        norm: f64,
        radius: f64,
    },
    #[error("monotonicity spot-check failed at iteration {iteration}: ratio {ratio}")]
    MonotonicityViolated { iteration: usize, ratio: f64 },
    #[error("solution norm {norm} exceeds the a priori bound {bound}")]
    SolutionBoundViolated { norm: f64, bound: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("adaptive Lipschitz estimate failed after {doublings} doublings")]
    AdaptiveLimit { doublings: usize },
}

impl Error {
    /// True for failures that signal an understated Lipschitz constant.
    pub fn is_contraction_failure(&self) -> bool {
        matches!(
            self,
            Error::NonContraction { .. } | Error::BallEscape { .. }
        )
    }
}
