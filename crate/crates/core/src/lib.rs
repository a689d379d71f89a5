//! Numerical verification of the classical-quantum correspondence for
//! shape-invariant systems: orthogonal-polynomial kernels, SUSY prepotential
//! factories, the reduction of a 2x2 linear spectral problem to classical and
//! quantum ODE residuals, Lax-pair catalogs with zero-curvature checks, and
//! the exact two-term solution of the oscillator spectral problem.

pub mod acceptance;
pub mod correspondence;
pub mod evolve;
pub mod field;
pub mod jet;
pub mod laxpair;
pub mod orthopoly;
pub mod report;
pub mod susy;

pub use field::{Domain, GridFunction, ScalarField};
