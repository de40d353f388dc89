//! Finite-N one-particle density matrices of the one-dimensional impenetrable Bose
//! gas on a circle, in a harmonic well and on an interval with Dirichlet or Neumann
//! walls, computed by independent routes that cross-check each other.

pub mod determinant;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod occupation;
pub mod painleve;
pub mod quadrature;
pub mod resolvent;
pub mod recurrence;
pub mod series;
pub mod special;
pub mod validate;

pub use error::{IbgError, Result};
pub use geometry::{GeometryConfig, Kind};
