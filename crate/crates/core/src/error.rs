use thiserror::Error;

/// Errors raised by the geometric and numerical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice vectors must be linearly independent and positively oriented (cross = {0})")]
    DegenerateLattice(f64),
    #[error("fourier table is not hermitian at frequency ({0}, {1})")]
    NotHermitian(i32, i32),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("operation requires rank >= {required}, got {actual}")]
    RankTooLow { required: usize, actual: usize },
    #[error("pseudovector weight mismatch: expected {expected}, got {actual}")]
    WeightMismatch { expected: i32, actual: i32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("orbit is not closed (closure residual {0:e})")]
    OrbitNotClosed(f64),
    #[error("not enough informative orbits: {0}")]
    NotEnoughOrbits(usize),
    #[error("curve passes through a critical region of the curvature")]
    CriticalRegion,
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
