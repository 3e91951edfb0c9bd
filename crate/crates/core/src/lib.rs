//! Hyperbolic radius of smooth planar domains.
//!
//! The maximal solution `u` of `-Δu + 4e^{2u} = 0` blows up at the boundary;
//! `v = e^{-u}` is the hyperbolic radius. Near the boundary the crate works
//! with the renormalized unknown `w = (v - 2d)/d²` in tubular coordinates
//! `(T, Y) = (distance, arclength of the foot point)`, where `w` solves a
//! degenerate (Fuchsian) elliptic equation.
//!
//! Layout:
//! - [`geometry`]: Fourier boundary curves, distance, collar charts.
//! - [`field`]: fields on charts, collar differential operators, Hölder tools.
//! - [`interior`]: maximal solution on a Cartesian grid.
//! - [`collar`]: the renormalized collar problem.
//! - [`model`]: the half-strip model operator and its explicit inverse.
//! - [`barriers`]: log-corrected sub/super-solutions.
//! - [`probe`]: dyadic regularity harness, expansion and exponent probes.
//! - [`pipeline`]: run configuration and the end-to-end driver.

pub mod barriers;
pub mod collar;
pub mod domains;
pub mod error;
pub mod field;
pub mod geometry;
pub mod interior;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod probe;
pub mod quadrature;

pub use error::{Error, Result};
