//! Numerical toolkit for SRB measures of piecewise-smooth hyperbolic maps
//! of the unit square with full-height posts and full-width strips.
//!
//! The modules follow the constructive steps of the theory: checking the
//! hyperbolicity and distortion conditions, computing unstable and stable
//! manifolds by the graph transform, estimating distortion along cylinders,
//! building Sinai local densities and empirical SRB measures, testing
//! absolute continuity of stable holonomies, and estimating entropy.

pub mod cli;
pub mod conditions;
pub mod config;
pub mod distortion;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod graph_transform;
pub mod measures;
pub mod numerics;
pub mod orbit;
pub mod symbolic;

pub use error::{Error, Result};
pub use geometry::{ConeParams, Jet, PiecewiseMap, Point2, Vector2};
