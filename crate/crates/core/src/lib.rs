//! Numerical laboratory for the spectral Brunn-Minkowski inequality of
//! Schrödinger operators `H = -div(A∇) + V` with Dirichlet conditions on
//! convex bodies, and for log-concavity of their ground states.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: convex bodies, Minkowski interpolation, volumes.
//! * [`potential`]: convex potential families and the Kolmogorov ground-state transform.
//! * [`grid`] and [`operator`]: tensor grids, grid functions and the finite-difference operator.
//! * [`eigen`]: smallest eigenpairs by block inverse iteration.
//! * [`semigroup`]: Trotter products, heat kernels, traces, Feynman-Kac sampling.
//! * [`verify`]: the inequality harnesses and their reports.

pub mod eigen;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod potential;
pub mod semigroup;
pub mod sparse;
pub mod verify;

pub use eigen::{smallest_eigenpairs, EigenOptions, Spectrum};
pub use error::{Error, Result};
pub use geometry::{BodyKind, ConvexBody, HalfSpace};
pub use grid::{BoxFunction, GridFunction, GridSpec, Lattice};
pub use linalg::Matrix;
pub use operator::{assemble, DiscreteOperator};
pub use potential::{KolmogorovData, Potential};

/// Schema tag carried by every serialized report.
pub const REPORT_SCHEMA: &str = "spectral-bm/1";

/// Seed for the deterministic starting block of the eigensolver.
pub const DEFAULT_SEED: u64 = 0xB4A11;
