//! Sparse and dense linear algebra kernels used by the grid solvers.
//!
//! Everything here is deliberately small and deterministic:
//!
//! - [`SparseSym`]: symmetric sparse matrix in CSR form (both triangles
//!   stored, so `matvec` is a plain row sweep),
//! - [`BandLdl`]: LDLᵀ factorization of a symmetric band matrix without
//!   pivoting but with dynamic pivot regularization, in the style of
//!   regularized KKT factorizations,
//! - [`BorderedSolver`]: block elimination for saddle systems
//!   `[[A, B], [Bᵀ, 0]]` with a banded `A` and a thin dense border `B`,
//!   polished by iterative refinement on the full system,
//! - [`tridiag`]: Sturm-sequence bisection and inverse iteration for
//!   symmetric tridiagonal eigenproblems,
//! - [`dense`]: dense LU with partial pivoting for small Schur complements
//!   and least-squares problems.

pub mod band;
pub mod bordered;
pub mod dense;
pub mod sparse;
pub mod tridiag;

pub use band::BandLdl;
pub use bordered::BorderedSolver;
pub use dense::{symmetric_eigenvalues, weighted_least_squares, DenseLu};
pub use sparse::SparseSym;
