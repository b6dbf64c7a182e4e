//! Sparse Monte Carlo + piecewise-constant Galerkin discretization of
//! nonlinear nonlocal diffusion equations, with a harness for measuring
//! empirical convergence rates.
//!
//! The continuum problem is
//!
//! ```text
//! ∂_t u(t,x) = f(u, x, t) + ∫_Q W(x,y) D(u(t,y) − u(t,x)) dy,   u(0,·) = g,
//! ```
//!
//! on Q = [0,1]^d with a square-integrable kernel W that may be singular
//! or discontinuous. The scheme partitions Q into n^d cells, replaces W by
//! its (possibly truncated) cell-average matrix, samples a sparse random
//! graph whose edge probabilities are proportional to those averages, and
//! integrates the resulting coupled ODE system with fixed-step RK4. The
//! sparsity parameter γ sets the edge density through α_n = n^{-dγ}.
//!
//! Modules:
//! - [`grid`]: partitions, cell averages, L² projection, L^p error and
//!   modulus of continuity, box-counting dimension.
//! - [`graphon`]: kernel definitions, sign splitting, truncation,
//!   cell-average matrices, sparsity schedules, singular-kernel rate
//!   formulas.
//! - [`sampling`]: sparse W-random graph generation (CSR), degree
//!   diagnostics, adjacency pixmaps.
//! - [`dynamics`]: the sampled and averaged semidiscrete systems, RK4,
//!   twisted states and the exact Kuramoto reference solution.
//! - [`experiments`]: Monte Carlo trials, rate estimation, the γ-sweep,
//!   the sampled-vs-averaged gap study, and projection-rate studies.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod graphon;
pub mod grid;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod util;

pub use error::{Error, Result};
