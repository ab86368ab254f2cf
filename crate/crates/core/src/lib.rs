//! Stationary kinks of variable-coefficient semilinear wave equations
//!
//! `∂_t²u − [∂_y²u + b(y)∂_y u + c(y)u] + F'(u) = 0`
//!
//! and the spectral theory of their linearisation: Jost solutions, Evans
//! functions, eigenvalue drift and threshold-resonance criteria, a
//! finite-difference oracle eigensolver, and a leapfrog simulator for the
//! time-dependent problem.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod error;
pub mod grid;
pub mod jost;
pub mod kink;
pub mod model;
pub mod nlkg;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::Grid;
