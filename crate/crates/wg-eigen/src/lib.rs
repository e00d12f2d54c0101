//! A weak Galerkin (WG) eigensolver for the Dirichlet Laplacian on
//! triangulated polygons.
//!
//! The discrete space pairs an interior polynomial of degree `k` per triangle
//! with a trace polynomial of degree `k - 1` per interior edge; the weak
//! gradient couples the two through an element-local variational definition.
//! The stabilized eigenproblem `a_s(u, v) = lambda b_w(u, v)` yields
//! asymptotic lower bounds on the exact eigenvalues, and the two-grid /
//! two-space corrections recover the accuracy of a fine direct solve from a
//! coarse (or low-degree) eigensolve plus a single linear solve.
//!
//! Modules:
//! - [`mesh`]: triangulations, uniform red refinement, ancestry.
//! - [`quadrature`], [`basis`]: Gauss rules and orthonormal element bases.
//! - [`space`]: the WG space, weak functions, L2 projections.
//! - [`assembly`]: weak gradients and the global sparse forms.
//! - [`solver`]: static condensation, shift-invert and dense eigensolves.
//! - [`algorithms`]: the direct, two-grid, and two-space eigensolvers.
//! - [`analysis`]: reference spectra, norms, convergence orders, bounds.
//! - [`experiment`]: declarative convergence studies and their artifacts.

// Indexed loops over parallel arrays are the clearest form for the small
// dense kernels here.
#![allow(clippy::needless_range_loop)]

pub mod algorithms;
pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod error;
pub mod experiment;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod space;
mod sparse;

pub use sparse::write_matrix_market_symmetric;
