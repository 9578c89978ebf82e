//! Itineraries, post and strip cylinders, and the coding map from symbol
//! strings to points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::section::{post_cylinder_row, strip_cylinder_column};
use crate::geometry::{PiecewiseMap, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Symbols a_0, a_1, …, a_{n−1} of a forward orbit.
    Forward,
    /// Symbols a_{−n+1}, …, a_{−1}, a_0 of a backward history, stored
    /// oldest first, so the last entry is the most recent symbol a_0.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub symbols: Vec<usize>,
    pub orientation: Orientation,
}

impl Itinerary {
    pub fn new(symbols: Vec<usize>, orientation: Orientation) -> Result<Self> {
        if symbols.is_empty() || symbols.contains(&0) {
            return Err(Error::InvalidItinerary);
        }
        Ok(Itinerary { symbols, orientation })
    }

    pub fn forward(symbols: Vec<usize>) -> Result<Self> {
        Self::new(symbols, Orientation::Forward)
    }

    pub fn backward(symbols: Vec<usize>) -> Result<Self> {
        Self::new(symbols, Orientation::Backward)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The `depth` symbols nearest to time 0: the first ones of a forward
    /// itinerary, the last ones of a backward one (still oldest first).
    pub fn truncated(&self, depth: usize) -> Itinerary {
        let d = depth.min(self.len());
        let symbols = match self.orientation {
            Orientation::Forward => self.symbols[..d].to_vec(),
            Orientation::Backward => self.symbols[self.len() - d..].to_vec(),
        };
        Itinerary { symbols, orientation: self.orientation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ItineraryOutcome {
    Complete { itinerary: Itinerary },
    BoundaryHit { step: usize, prefix: Vec<usize> },
}

impl ItineraryOutcome {
    pub fn symbols(&self) -> &[usize] {
        match self {
            ItineraryOutcome::Complete { itinerary } => &itinerary.symbols,
            ItineraryOutcome::BoundaryHit { prefix, .. } => prefix,
        }
    }
}

/// Symbols of the first `n` points of the orbit of `z`. In strict mode an
/// orbit point flagged as boundary-adjacent ends the itinerary with
/// `BoundaryHit`; otherwise the half-open convention decides.
pub fn forward_itinerary(map: &PiecewiseMap, z: Point2, n: usize, strict: bool) -> Result<ItineraryOutcome> {
    let mut p = Point2::in_square(z.x, z.y)?;
    let mut symbols = Vec::with_capacity(n);
    for step in 0..n {
        let hit = match map.branch_of(p) {
            Ok(h) => h,
            Err(Error::OutOfDomain { .. }) => return Ok(ItineraryOutcome::BoundaryHit { step, prefix: symbols }),
            Err(e) => return Err(e),
        };
        if strict && hit.boundary_adjacent {
            return Ok(ItineraryOutcome::BoundaryHit { step, prefix: symbols });
        }
        symbols.push(hit.index);
        if step + 1 < n {
            let w = map.eval(hit.index, p);
            // Images of boundary-adjacent points may overshoot by rounding.
            p = if w.x >= -1e-12 && w.x <= 1.0 + 1e-12 && w.y >= -1e-12 && w.y <= 1.0 + 1e-12 {
                w.clamped()
            } else {
                return Ok(ItineraryOutcome::BoundaryHit { step: step + 1, prefix: symbols });
            };
        }
    }
    Ok(ItineraryOutcome::Complete { itinerary: Itinerary { symbols, orientation: Orientation::Forward } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderKind {
    /// E_{a_0…a_{n−1}}: full height.
    Post,
    /// S_{a_{−n+1}…a_0}: full width.
    Strip,
}

/// Number of levels at which cylinder cross-sections are measured.
pub const CYLINDER_LEVELS: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cylinder {
    pub kind: CylinderKind,
    pub itinerary: Itinerary,
    pub width_min: f64,
    pub width_max: f64,
    /// (level, lo, hi) cross-sections: x-intervals at heights y for posts,
    /// y-intervals at abscissae x for strips.
    pub sections: Vec<(f64, f64, f64)>,
}

impl Cylinder {
    pub fn depth(&self) -> usize {
        self.itinerary.len()
    }
}

fn levels() -> impl Iterator<Item = f64> {
    (0..CYLINDER_LEVELS).map(|k| k as f64 / (CYLINDER_LEVELS - 1) as f64)
}

fn build(kind: CylinderKind, itinerary: Itinerary, sections: Vec<(f64, f64, f64)>) -> Result<Cylinder> {
    if sections.is_empty() {
        return Err(Error::EmptyCylinder { word: itinerary.symbols });
    }
    let widths = sections.iter().map(|s| s.2 - s.1);
    let width_min = widths.clone().fold(f64::INFINITY, f64::min);
    let width_max = widths.fold(0.0, f64::max);
    Ok(Cylinder { kind, itinerary, width_min, width_max, sections })
}

/// Post cylinder E_{a_0…a_{n−1}} of a forward word, measured on
/// [`CYLINDER_LEVELS`] horizontal lines.
pub fn post_cylinder(map: &PiecewiseMap, word: &[usize]) -> Result<Cylinder> {
    let it = Itinerary::forward(word.to_vec())?;
    for &w in word {
        map.check_branch(w)?;
    }
    let sections: Vec<_> = levels().filter_map(|y| post_cylinder_row(map, word, y).map(|(l, r)| (y, l, r))).collect();
    build(CylinderKind::Post, it, sections)
}

/// Strip cylinder S_{a_{−n+1}…a_0} of a backward word (oldest first),
/// measured on [`CYLINDER_LEVELS`] vertical lines. Sections come from
/// bisection along each line using branch inverses.
pub fn strip_cylinder(map: &PiecewiseMap, past: &[usize]) -> Result<Cylinder> {
    let it = Itinerary::backward(past.to_vec())?;
    for &w in past {
        map.check_branch(w)?;
    }
    let rev: Vec<usize> = past.iter().rev().copied().collect();
    let sections: Vec<_> = levels().filter_map(|x| strip_cylinder_column(map, &rev, x).map(|(l, r)| (x, l, r))).collect();
    build(CylinderKind::Strip, it, sections)
}

/// Extend a post cylinder by one symbol.
pub fn refine_cylinder(map: &PiecewiseMap, c: &Cylinder, symbol: usize) -> Result<Cylinder> {
    match c.kind {
        CylinderKind::Post => {
            let mut word = c.itinerary.symbols.clone();
            word.push(symbol);
            post_cylinder(map, &word)
        }
        CylinderKind::Strip => Err(Error::ConfigInvalid("refine_cylinder expects a post cylinder".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodedPoint {
    pub point: Point2,
    /// Max of the post-cylinder width and strip-cylinder height used.
    pub residual: f64,
}

/// Approximate π(i) for the bi-infinite string (past . future) as the
/// midpoint of E_{future[..depth]} ∩ S_{past[-depth..]}.
pub fn point_from_itinerary(map: &PiecewiseMap, past: &Itinerary, future: &Itinerary, depth: usize) -> Result<CodedPoint> {
    if depth == 0 || depth > past.len() || depth > future.len() {
        return Err(Error::InsufficientPast { depth, available: past.len().min(future.len()) });
    }
    let fwd = &future.truncated(depth).symbols;
    let back: Vec<usize> = past.truncated(depth).symbols.iter().rev().copied().collect();
    let mut p = Point2::new(0.5, 0.5);
    let mut residual = f64::INFINITY;
    // Alternate x- and y-localisation; the post section depends on y with
    // slope at most α, so a few sweeps settle the midpoint.
    for _ in 0..6 {
        let (l, r) = post_cylinder_row(map, fwd, p.y).ok_or(Error::EmptyCylinder { word: fwd.clone() })?;
        p.x = 0.5 * (l + r);
        let (b, t) = strip_cylinder_column(map, &back, p.x).ok_or(Error::EmptyCylinder { word: back.clone() })?;
        p.y = 0.5 * (b + t);
        residual = (r - l).max(t - b);
    }
    Ok(CodedPoint { point: p, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_digits() {
        let b = PiecewiseMap::baker(2).unwrap();
        let it = forward_itinerary(&b, Point2::new(0.3, 0.5), 5, false).unwrap();
        assert_eq!(it.symbols(), &[1, 2, 1, 1, 2]);
        let hit = forward_itinerary(&b, Point2::new(0.5, 0.5), 3, true).unwrap();
        assert_eq!(hit, ItineraryOutcome::BoundaryHit { step: 0, prefix: vec![] });
        let l = PiecewiseMap::lueroth();
        assert_eq!(forward_itinerary(&l, Point2::new(0.7, 0.1), 1, false).unwrap().symbols(), &[1]);
    }

    #[test]
    fn refinement_halves_baker_cylinders() {
        let b = PiecewiseMap::baker(2).unwrap();
        let e1 = post_cylinder(&b, &[1]).unwrap();
        let e12 = refine_cylinder(&b, &e1, 2).unwrap();
        assert_eq!(e12.width_max, 0.25);
        assert_eq!(e12.width_min, 0.25);
        let l = PiecewiseMap::lueroth();
        let c = refine_cylinder(&l, &post_cylinder(&l, &[1]).unwrap(), 1).unwrap();
        assert_eq!(c.width_max, 0.25);
    }

    #[test]
    fn strip_cylinders_of_baker() {
        let b = PiecewiseMap::baker(2).unwrap();
        // S_{a_{-1} a_0} with a_{-1} = 2, a_0 = 1: y in [1/4, 1/2].
        let s = strip_cylinder(&b, &[2, 1]).unwrap();
        assert_eq!((s.sections[3].1, s.sections[3].2), (0.25, 0.5));
    }

    #[test]
    fn fixed_points_from_constant_strings() {
        let b = PiecewiseMap::baker(2).unwrap();
        let ones = Itinerary::forward(vec![1; 30]).unwrap();
        let past = Itinerary::backward(vec![1; 30]).unwrap();
        let c = point_from_itinerary(&b, &past, &ones, 20).unwrap();
        assert!(c.point.dist(&Point2::new(0.0, 0.0)) <= 2f64.powi(-20));
        let l = PiecewiseMap::lueroth();
        let c = point_from_itinerary(&l, &past, &ones, 20).unwrap();
        assert!(c.point.dist(&Point2::new(1.0, 0.0)) <= c.residual);
    }
}
