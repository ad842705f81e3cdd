//! Numerical toolkit for varieties with degenerate Gauss maps.
//!
//! The crate builds parametrized projective varieties (joins, cones, secant
//! and tangential varieties, hyperbands, conjugate line unions, duals) and
//! measures their differential invariants at random generic sample points:
//! the rank of the Gauss map, the fiber dimension, the second fundamental
//! form, focal points on the fibers with multiplicities, and the dimensions
//! of the varieties those focal points sweep out. On top of the invariants
//! sits a classifier for threefolds in P^4 whose Gauss map has
//! one-dimensional fibers.
//!
//! Everything is numerical: claims are checked at sampled parameter points
//! with retry-on-degeneracy, integer invariants are decided by
//! singular-value gap rules, and all randomness flows from a single seed.

pub mod classify;
pub mod config;
pub mod error;
pub mod expr;
pub mod focal;
pub mod frames;
pub mod gauss;
pub mod jets;
pub mod linalg;
pub mod suite;
pub mod variety;

pub use config::{RunConfig, Tolerances};
pub use error::{Error, Result};
pub use jets::{Jet3, C};
pub use variety::Variety;
