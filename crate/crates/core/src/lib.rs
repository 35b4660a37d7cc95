//! Constraint-energy-minimizing generalized multiscale finite elements for
//! the first-order wave equation `ρ ∂ₜp + div v = f`, `κ⁻¹ ∂ₜv + ∇p = 0` with
//! zero normal velocity on the boundary of the unit square.
//!
//! The fine scale is the lowest-order Raviart–Thomas pair on a uniform
//! rectangular grid. The coarse scale builds a local spectral pressure space
//! per coarse element and velocity basis functions on oversampled patches,
//! then advances the reduced system with a staggered leapfrog scheme.

pub mod assembly;
pub mod cem;
pub mod dense;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod lab;
pub mod pou;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
