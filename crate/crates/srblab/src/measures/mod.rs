//! Sinai local measures, empirical SRB measures and stable holonomy.

pub mod holonomy;
pub mod sinai;
pub mod srb;

pub use holonomy::{holonomy_test, HolonomyOptions, HolonomyReport};
pub use sinai::{sinai_density, unstable_jacobian, SinaiDensity};
pub use srb::{
    birkhoff_srb, chi_square_uniform, observable_z_scores, pushforward_srb, BirkhoffOptions, ChiSquare,
    EmpiricalMeasure, PushforwardOptions, Sample, OBSERVABLES,
};
