//! Points, cones, jets and branch charts of piecewise hyperbolic maps.

pub mod expr;
mod family;
mod jet;
mod map;
mod power;
pub mod section;

pub use family::{Baker, CustomFamily, Family, Lueroth, PerturbedLueroth};
pub use jet::{ConeParams, Jet, Point2, Vector2};
pub use map::{BranchHit, PiecewiseMap, BOUNDARY_TOL, DEFAULT_N_MAX};
pub use power::PowerFamily;
