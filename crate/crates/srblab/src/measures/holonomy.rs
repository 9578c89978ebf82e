//! Stable holonomy between two unstable curves, by cylinder matching.
//!
//! For z on γ with depth-n itinerary w, the holonomy image π(z) lies in
//! η ∩ E_w; we take the midpoint of that section. The density of π_*ρ_γ
//! with respect to ρ_η at π(z) is estimated by |γ ∩ E_w| / |η ∩ E_w|.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{graph_tangent, log_growth};
use crate::error::{Error, Result};
use crate::geometry::section::post_cylinder_on_curve;
use crate::geometry::{PiecewiseMap, Point2};
use crate::graph_transform::CurveGraph;
use crate::symbolic::{forward_itinerary, ItineraryOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolonomyOptions {
    pub pairs: usize,
    pub bins: usize,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        HolonomyOptions { pairs: 256, bins: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub z: f64,
    pub image: f64,
    pub density: f64,
    /// |D_γF^n(z)| / |D_ηF^n(π(z))| along the curve tangents.
    pub derivative_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyReport {
    pub depth: usize,
    pub pairs: Vec<MatchedPair>,
    /// Pairs dropped for boundary-adjacent itineraries or degenerate sections.
    pub dropped: usize,
    /// Mean density per bin of π(z) over [0, 1]; None for empty bins.
    pub bin_density: Vec<Option<f64>>,
    pub density_min: f64,
    pub density_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

fn match_one(map: &PiecewiseMap, gamma: &CurveGraph, eta: &CurveGraph, depth: usize, x: f64) -> Result<MatchedPair> {
    let z = Point2::new(x, gamma.value(x));
    let word = match forward_itinerary(map, z, depth, true)? {
        ItineraryOutcome::Complete { itinerary } => itinerary.symbols,
        ItineraryOutcome::BoundaryHit { .. } => return Err(Error::ItineraryMismatch),
    };
    let g = |t: f64| gamma.value(t);
    let h = |t: f64| eta.value(t);
    let sg = post_cylinder_on_curve(map, &word, &g, gamma.lo(), gamma.hi());
    let sh = post_cylinder_on_curve(map, &word, &h, eta.lo(), eta.hi());
    let ((a, b), (c, d)) = match (sg, sh) {
        (Some(p), Some(q)) => (p, q),
        _ => return Err(Error::EmptyCylinder { word }),
    };
    if b - a < 1e-14 || d - c < 1e-14 {
        return Err(Error::DegenerateCylinder { word, width: (b - a).min(d - c) });
    }
    if x < a - 1e-12 || x > b + 1e-12 {
        return Err(Error::ItineraryMismatch);
    }
    let image = 0.5 * (c + d);
    let lz = log_growth(map, &word, z, graph_tangent(gamma.slope(x)));
    let lw = log_growth(map, &word, Point2::new(image, eta.value(image)), graph_tangent(eta.slope(image)));
    Ok(MatchedPair { z: x, image, density: (b - a) / (d - c), derivative_ratio: (lz - lw).exp() })
}

/// Position of each sample within its spacing cell (1/φ), chosen so that no
/// sample is a dyadic rational whose baker orbit lands on a post edge.
const OFFSET: f64 = 0.618_033_988_749_894_8;

/// Holonomy density and derivative-ratio statistics for `opts.pairs`
/// evenly spaced points of γ at cylinder depth `depth`.
pub fn holonomy_test(
    map: &PiecewiseMap,
    gamma: &CurveGraph,
    eta: &CurveGraph,
    depth: usize,
    opts: &HolonomyOptions,
) -> Result<HolonomyReport> {
    let m = opts.pairs.max(1);
    let results: Vec<Result<MatchedPair>> = (0..m)
        .into_par_iter()
        .map(|k| match_one(map, gamma, eta, depth, (k as f64 + OFFSET) / m as f64))
        .collect();
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for r in results {
        match r {
            Ok(p) => pairs.push(p),
            Err(
                Error::ItineraryMismatch
                | Error::DegenerateCylinder { .. }
                | Error::EmptyCylinder { .. }
                | Error::TailTruncated { .. }
                | Error::OutOfDomain { .. },
            ) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    let nb = opts.bins.max(1);
    let mut sums = vec![(0.0, 0usize); nb];
    for p in &pairs {
        let b = ((p.image * nb as f64) as usize).min(nb - 1);
        sums[b].0 += p.density;
        sums[b].1 += 1;
    }
    let bin_density: Vec<Option<f64>> = sums.iter().map(|&(s, c)| (c > 0).then(|| s / c as f64)).collect();
    let occupied = bin_density.iter().flatten();
    let density_min = occupied.clone().copied().fold(f64::INFINITY, f64::min);
    let density_max = occupied.copied().fold(0.0, f64::max);
    let ratio_min = pairs.iter().map(|p| p.derivative_ratio).fold(f64::INFINITY, f64::min);
    let ratio_max = pairs.iter().map(|p| p.derivative_ratio).fold(0.0, f64::max);
    Ok(HolonomyReport { depth, pairs, dropped, bin_density, density_min, density_max, ratio_min, ratio_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_structure_gives_unit_density() {
        let b = PiecewiseMap::baker(2).unwrap();
        let gamma = CurveGraph::constant(0.2, 65);
        let eta = CurveGraph::from_fn(0.0, 1.0, 65, |x| (0.6 + 0.1 * x * x, 0.2 * x, 0.2));
        let r = holonomy_test(&b, &gamma, &eta, 8, &HolonomyOptions::default()).unwrap();
        assert!(!r.pairs.is_empty());
        assert!(r.pairs.iter().all(|p| p.density == 1.0 && p.derivative_ratio == 1.0));
        let same = holonomy_test(&b, &gamma, &gamma, 8, &HolonomyOptions::default()).unwrap();
        assert!(same.pairs.iter().all(|p| (p.image - p.z).abs() < 2f64.powi(-8)));
    }
}
