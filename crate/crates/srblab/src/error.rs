use thiserror::Error;

/// Every failure the library can report. Each variant has a stable
/// machine-readable code (see [`Error::code`]) used in CLI JSON output.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies beyond the enumerated branches (N_max = {n_max})")]
    TailTruncated { x: f64, y: f64, n_max: usize },
    #[error("point ({x}, {y}) is outside every branch domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("invalid branch index {0}")]
    InvalidBranch(usize),
    #[error("x = {x} is outside the base image [{lo}, {hi}]")]
    OutOfImage { x: f64, lo: f64, hi: f64 },
    #[error("contraction violated: {what} = {value}")]
    ContractionViolated { what: String, value: f64 },
    #[error("graph transform did not converge after {iterations} iterations (last d0 = {d0:e})")]
    NotConverged { iterations: usize, d0: f64 },
    #[error("depth {depth} exceeds the available past length {available}")]
    InsufficientPast { depth: usize, available: usize },
    #[error("cylinder {word:?} is empty on the sampled levels")]
    EmptyCylinder { word: Vec<usize> },
    #[error("curve meets cylinder {word:?} in a set of width {width:e}")]
    DegenerateCylinder { word: Vec<usize>, width: f64 },
    #[error("all {seeds} seeds hit a post boundary")]
    AllSeedsEscaped { seeds: usize },
    #[error("{lost:e} of the pushforward weight was lost to tail truncation")]
    MassLeak { lost: f64 },
    #[error("transported vector left the unstable cone at step {step}")]
    ConeEscape { step: usize },
    #[error("depth-{depth} cylinder visited only {visits} times")]
    UnderSampled { depth: usize, visits: usize },
    #[error("map does not declare disjoint strips")]
    StripsOverlap,
    #[error("point is within 1e-12 of a cylinder boundary")]
    ItineraryMismatch,
    #[error("itinerary must be nonempty with symbols >= 1")]
    InvalidItinerary,
    #[error("root solve failed: {0}")]
    RootFailed(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::TailTruncated { .. } => "TAIL_TRUNCATED",
            Error::OutOfDomain { .. } => "OUT_OF_DOMAIN",
            Error::InvalidBranch(_) => "INVALID_BRANCH",
            Error::OutOfImage { .. } => "OUT_OF_IMAGE",
            Error::ContractionViolated { .. } => "CONTRACTION_VIOLATED",
            Error::NotConverged { .. } => "NOT_CONVERGED",
            Error::InsufficientPast { .. } => "INSUFFICIENT_PAST",
            Error::EmptyCylinder { .. } => "EMPTY_CYLINDER",
            Error::DegenerateCylinder { .. } => "DEGENERATE_CYLINDER",
            Error::AllSeedsEscaped { .. } => "ALL_SEEDS_ESCAPED",
            Error::MassLeak { .. } => "MASS_LEAK",
            Error::ConeEscape { .. } => "CONE_ESCAPE",
            Error::UnderSampled { .. } => "UNDER_SAMPLED",
            Error::StripsOverlap => "STRIPS_OVERLAP",
            Error::ItineraryMismatch => "ITINERARY_MISMATCH",
            Error::InvalidItinerary => "INVALID_ITINERARY",
            Error::RootFailed(_) => "ROOT_FAILED",
            Error::ConfigInvalid(_) => "CONFIG_INVALID",
            Error::Expression(_) => "EXPRESSION",
            Error::Io(_) => "IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
