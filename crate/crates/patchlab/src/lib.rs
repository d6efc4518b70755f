//! Numerical laboratory for the rigidity of stationary and uniformly
//! rotating vortex patches of the 2D Euler and gSQG equations.
//!
//! The crate evaluates patch potentials, solves the constrained torsion
//! problem, computes first-variation functionals two independent ways,
//! performs continuous Steiner symmetrization, and evaluates the explicit
//! angular-velocity thresholds of the fast-rotation rigidity theorem.

pub mod cli;
pub mod contour;
pub mod error;
pub mod geometry;
pub mod maxprin;
pub mod poisson;
pub mod potential;
pub mod quad;
pub mod special;
pub mod steiner;
pub mod variation;

pub use error::{Error, Result};
