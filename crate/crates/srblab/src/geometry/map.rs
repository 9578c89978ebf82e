use std::sync::Arc;

use super::family::{Baker, Family, Lueroth, PerturbedLueroth};
use super::jet::{ConeParams, Jet, Point2};
use crate::error::{Error, Result};

/// Distance from a post boundary below which `branch_of` flags a point.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default enumeration cut-off for countable families.
pub const DEFAULT_N_MAX: usize = 1_000_000;

/// A piecewise map F of the unit square: branch family, cone constants,
/// the declared distortion constant C0 and the truncation index N_max used
/// for countable families.
#[derive(Debug, Clone)]
pub struct PiecewiseMap {
    family: Arc<dyn Family>,
    pub cone: ConeParams,
    pub c0: f64,
    pub n_max: usize,
}

/// Result of [`PiecewiseMap::branch_of`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchHit {
    pub index: usize,
    pub boundary_adjacent: bool,
}

impl PiecewiseMap {
    pub fn new<F: Family + 'static>(family: F, cone: ConeParams, c0: f64, n_max: usize) -> Self {
        PiecewiseMap { family: Arc::new(family), cone, c0, n_max }
    }

    pub fn from_arc(family: Arc<dyn Family>, cone: ConeParams, c0: f64, n_max: usize) -> Self {
        PiecewiseMap { family, cone, c0, n_max }
    }

    /// Baker's map with `n >= 2` equal posts; cone (1/2, n).
    pub fn baker(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::ConfigInvalid(format!("baker needs N >= 2, got {n}")));
        }
        Ok(Self::new(Baker { n }, ConeParams::new(0.5, n as f64)?, 1.0, n))
    }

    /// Lüroth-type countable baker map; cone (1/2, 2).
    pub fn lueroth() -> Self {
        Self::new(Lueroth, ConeParams { alpha: 0.5, k0: 2.0 }, 1.0, DEFAULT_N_MAX)
    }

    /// Nonlinear perturbation of [`PiecewiseMap::lueroth`]; cone (1/2, 3/2).
    pub fn perturbed_lueroth(eps: f64) -> Result<Self> {
        if eps.is_nan() || eps.abs() >= 0.25 {
            return Err(Error::ConfigInvalid(format!("|epsilon| must be below 0.25, got {eps}")));
        }
        Ok(Self::new(PerturbedLueroth { eps }, ConeParams { alpha: 0.5, k0: 1.5 }, 1.0, DEFAULT_N_MAX))
    }

    pub fn with_cone(mut self, cone: ConeParams) -> Self {
        self.cone = cone;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max.max(1);
        self
    }

    pub fn family(&self) -> &dyn Family {
        self.family.as_ref()
    }

    pub fn name(&self) -> String {
        self.family.name()
    }

    pub fn is_countable(&self) -> bool {
        self.family.branch_count().is_none()
    }

    pub fn is_affine(&self) -> bool {
        self.family.is_affine()
    }

    /// Number of enumerated branches: the branch count, or N_max.
    pub fn branch_limit(&self) -> usize {
        self.family.branch_count().unwrap_or(self.n_max)
    }

    pub fn check_branch(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.branch_limit() {
            Err(Error::InvalidBranch(i))
        } else {
            Ok(())
        }
    }

    pub fn post_bounds(&self, i: usize, y: f64) -> (f64, f64) {
        self.family.post_bounds(i, y)
    }

    pub fn strip_bounds(&self, i: usize, x: f64) -> (f64, f64) {
        self.family.strip_bounds(i, x)
    }

    /// Owning branch of `z` under the half-open convention (a point on a
    /// shared boundary belongs to the branch on its right).
    pub fn branch_of(&self, z: Point2) -> Result<BranchHit> {
        if !(z.is_in_square() && z.x.is_finite() && z.y.is_finite()) {
            return Err(Error::OutOfDomain { x: z.x, y: z.y });
        }
        let limit = self.branch_limit();
        match self.family.locate(z.x, z.y, limit) {
            Some(i) => {
                let (l, r) = self.family.post_bounds(i, z.y);
                let near_left = z.x - l <= BOUNDARY_TOL && l > 0.0;
                let near_right = r - z.x <= BOUNDARY_TOL && r < 1.0;
                Ok(BranchHit { index: i, boundary_adjacent: near_left || near_right })
            }
            None if self.is_countable() => Err(Error::TailTruncated { x: z.x, y: z.y, n_max: self.n_max }),
            None => Err(Error::OutOfDomain { x: z.x, y: z.y }),
        }
    }

    /// δ_z(E_i): width of the horizontal slice of post i at height z.y.
    pub fn zwidth(&self, i: usize, z: Point2) -> Result<f64> {
        self.check_branch(i)?;
        let (l, r) = self.family.post_bounds(i, z.y);
        Ok((r - l).max(0.0))
    }

    /// Jet of the owning branch at `z`.
    pub fn jet_at(&self, z: Point2) -> Result<Jet> {
        let hit = self.branch_of(z)?;
        Ok(self.family.jet(hit.index, z.x, z.y))
    }

    /// Jet of branch `i` at `z` (no ownership check).
    pub fn jet(&self, i: usize, z: Point2) -> Jet {
        self.family.jet(i, z.x, z.y)
    }

    pub fn eval(&self, i: usize, z: Point2) -> Point2 {
        self.family.eval(i, z.x, z.y)
    }

    pub fn inverse(&self, i: usize, w: Point2) -> Result<Point2> {
        self.family.inverse(i, w.x, w.y)
    }

    /// One step of F: owning branch and image point.
    pub fn step(&self, z: Point2) -> Result<(BranchHit, Point2)> {
        let hit = self.branch_of(z)?;
        Ok((hit, self.family.eval(hit.index, z.x, z.y)))
    }

    /// 1 − Σ widths of the enumerated posts at height `y`: the mass left to
    /// the truncated tail (G2 up to this defect).
    pub fn tail_width(&self, y: f64) -> f64 {
        let mut s = 0.0;
        for i in 1..=self.branch_limit() {
            let (l, r) = self.family.post_bounds(i, y);
            s += r - l;
        }
        1.0 - s
    }

    /// Sign of f_{1x} on post `i` (constant by the cone conditions).
    pub fn orientation(&self, i: usize) -> f64 {
        let (l, r) = self.family.post_bounds(i, 0.5);
        self.family.jet(i, 0.5 * (l + r), 0.5).f1x().signum()
    }

    /// The map F^t; see [`super::power::PowerFamily`].
    pub fn power(&self, t: usize, depth_limit: usize) -> Result<PiecewiseMap> {
        super::power::power_map(self, t, depth_limit)
    }

    /// For power maps: the branch composed from the base word.
    pub fn branch_for_word(&self, word: &[usize]) -> Option<usize> {
        self.family.branch_for_word(word)
    }

    pub fn word_of(&self, i: usize) -> Option<Vec<usize>> {
        self.family.word_of(i)
    }
}
