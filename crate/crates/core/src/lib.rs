//! Numerical flows of star-shaped hypersurfaces in R^{n+1} by anisotropic
//! functions of the principal curvatures, written as radial graphs over
//! the unit sphere.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod selfcheck;
pub mod speed;
pub mod spheregrid;
pub mod symfunc;

pub use error::{Error, Result};
