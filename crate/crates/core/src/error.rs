use thiserror::Error;

/// Errors produced anywhere in the discretization and solution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate simplex {index}: measure {measure:e}")]
    DegenerateSimplex { index: usize, measure: f64 },

    #[error("non-conforming connectivity: face {vertices:?} is shared by {count} cells")]
    NonConforming { vertices: Vec<usize>, count: usize },

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("unsupported quadrature degree {degree} in dimension {dim}")]
    UnsupportedQuadrature { dim: usize, degree: usize },

    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),

    #[error("face {0} is a boundary face and has no minus side")]
    NoMinusTrace(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inverted element {cell}: det F = {det:e}")]
    InvertedElement { cell: usize, det: f64 },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("linear solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolveFailed { residual: f64, iterations: usize },

    #[error("Newton iteration did not converge: {reason}")]
    NonConvergence {
        reason: String,
        trace: Box<crate::solver::NewtonTrace>,
    },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
