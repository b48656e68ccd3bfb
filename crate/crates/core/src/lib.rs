//! Spline and T-spline discrete De Rham complexes.
//!
//! The crate builds tensor-product spline complexes and their T-spline
//! analogues on analysis-suitable T-meshes, checks exactness with exact
//! integer arithmetic, and assembles and solves the Maxwell eigenvalue,
//! source and waveguide problems on multipatch geometries.

pub mod assembly;
pub mod benchmarks;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod multipatch;
pub mod parametric_complex;
pub mod solvers;
pub mod space;
pub mod sparse;
pub mod tmesh;
pub mod tspline_complex;
pub mod univariate;

pub use error::{Error, Result};
pub use univariate::{Knot, KnotVector, LocalKnotVector};
