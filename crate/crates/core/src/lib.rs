//! Numerical laboratory for holomorphic tent spaces on the unit ball of ℂⁿ.
//!
//! The crate computes the geometric objects of the ball (Bergman metric,
//! Möbius involutions, Korányi approach regions), integrates parametric
//! measures over them, evaluates tent quasi-norms and area operators, and
//! decides the Carleson-embedding criteria that govern inclusions and
//! superposition operators between Hardy type tent spaces.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`geometry`] | points, regions, metric, involutions, cap measure |
//! | [`measures`] | measure families, stratified integration, `μ̂_r` |
//! | [`lattice`] | greedy δ-lattices and their verification |
//! | [`functions`] | symbolic holomorphic functions, Rademacher signs |
//! | [`norms`] | tent norms, area operator, sequence tent norms |
//! | [`criteria`] | case functionals, verdicts, closed-form predicates |
//! | [`cli`] | the `tentlab` command line front end |
//! | [`acceptance`] | the acceptance suite shared by tests and `selftest` |
//!
//! All randomness flows from explicit `u64` seeds through [`rng`], so every
//! estimate is bit-reproducible regardless of the worker count.

pub mod acceptance;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod functions;
pub mod geometry;
pub mod lattice;
pub mod measures;
pub mod norms;
pub mod rng;

mod index;
mod quadrature;
mod sampling;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
