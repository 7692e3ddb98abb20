//! Assouad codimensions, Aikawa conditions and fractional Hardy inequalities
//! on uniform grids.

pub mod aikawa;
pub mod assouad;
pub mod certificate;
pub mod distance;
pub mod error;
pub mod fractal;
pub mod grid;
pub mod hardy;
pub mod measure;
pub mod sampling;
pub mod truncation;

pub use error::{Error, Result};
pub use grid::{Ball, Geometry, GridSet};
