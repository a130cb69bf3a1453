//! Symmetric Nitsche–Newton discontinuous Galerkin solvers.
//!
//! Dirichlet conditions and inter-element continuity are imposed by
//! eliminating the Lagrange multiplier of an augmented Lagrangian, which keeps
//! every Newton tangent symmetric whenever the material tangent is. The crate
//! covers scalar problems in 2D (linear diffusion and antiplane shear
//! plasticity) and Mooney–Rivlin finite elasticity in 3D, together with a
//! conforming reference discretization.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod assembly;
pub mod dg_elasticity;
pub mod dg_scalar;
pub mod error;
pub mod fem;
pub mod materials;
pub mod mesh;
pub mod output;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/materials.md")]
    mod materials {}
    #[doc = include_str!("../../../book/src/scalar.md")]
    mod scalar {}
    #[doc = include_str!("../../../book/src/hybrid.md")]
    mod hybrid {}
    #[doc = include_str!("../../../book/src/elasticity.md")]
    mod elasticity {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
