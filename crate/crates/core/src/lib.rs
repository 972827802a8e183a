//! Large-deviation exponents for Gaussian random fields staying above a high
//! level along a whole path.
//!
//! The exponent of `P(X(ξ(v)) > u for all v)` is `-C/2 · u²` where `C` is the
//! capacity of the path with respect to the covariance kernel: the reciprocal
//! of the minimal energy `∫∫ R(ξ(u), ξ(v)) μ(du) μ(dv)` over probability
//! measures `μ` on `[0, 1]`. This crate discretizes that problem, solves the
//! resulting simplex-constrained quadratic program, certifies the optimum,
//! and provides the closed forms, phase-transition detection, asymptotics and
//! Monte Carlo checks that surround it.
//!
//! Module map:
//!
//! - [`kernel`]: covariance kernels, Gram matrices, PSD checks.
//! - [`geometry`]: polyline paths and their parameter grids.
//! - [`capacity`]: the minimal-energy solver, certificates and atom extraction.
//! - [`analysis`]: one-dimensional regimes, limiting shapes, critical lengths.
//! - [`asymptotics`]: long-interval laws for short and long memory.
//! - [`multidim`]: fixed-path capacities in `ℝ^d` and path search.
//! - [`simulate`]: exact Gaussian sampling and exceedance estimates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod asymptotics;
pub mod capacity;
mod error;
pub mod geometry;
pub mod kernel;
pub mod multidim;
pub mod quad;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};

/// Default grid size for path discretizations.
pub const DEFAULT_N: usize = 401;
/// Default relative duality-gap tolerance of the capacity solver.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default size of the evaluation grid for continuum conditions and shapes.
pub const DEFAULT_T_GRID: usize = 2001;
/// Default atom threshold used by [`capacity::extract_atoms`].
pub const DEFAULT_ATOM_EPS: f64 = 0.05;
