//! Sparse symmetric linear algebra and the Newton driver.

mod newton;
mod sparse;

pub use newton::{
    newton_solve, IterationRecord, NewtonConfig, NewtonSolution, NewtonStatus, NewtonTrace,
    NonlinearProblem,
};
pub use sparse::{
    linear_solve, linear_solve_with, symmetry_defect, CsrMatrix, LinearSolverKind,
    LinearSolverOptions, SparseSymmetricSystem, TripletBuilder, DIRECT_RESIDUAL_CAP,
};

/// Runs the sparse factorizations single-threaded (`true`) or on the rayon
/// pool (`false`). Assembly results do not depend on the thread count either
/// way, since local blocks are merged in a fixed order.
pub fn set_deterministic(deterministic: bool) {
    faer::set_global_parallelism(if deterministic {
        faer::Par::Seq
    } else {
        faer::Par::rayon(0)
    });
}
