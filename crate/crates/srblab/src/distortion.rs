//! Θ-distortion of branches and compositions, and bounded distortion of
//! derivatives along unstable curves inside cylinders.
//!
//! Θ_z(f, E) = sup_{w∈E} |D²f(w)| δ_z(E) / |f₁ₓ(w)| with δ_z(E) the width of
//! the horizontal slice of E through z. Derivative products along orbits
//! are kept as sums of logs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::section::{post_cylinder_on_curve, post_cylinder_row};
use crate::geometry::{Jet, PiecewiseMap, Point2, Vector2};
use crate::graph_transform::CurveGraph;

/// Jet of F^n = f_{w[n−1]}∘…∘f_{w[0]} at `z`.
pub fn composition_jet(map: &PiecewiseMap, word: &[usize], z: Point2) -> Jet {
    let mut j = Jet::identity(z);
    for &s in word {
        let step = map.jet(s, j.value);
        j = Jet::compose(&step, &j);
    }
    j
}

/// log |DF^n_z(v)| along `word` with v renormalised after every step.
pub fn log_growth(map: &PiecewiseMap, word: &[usize], z: Point2, v: Vector2) -> f64 {
    let mut p = z;
    let mut v = v.normalized();
    let mut acc = 0.0;
    for &s in word {
        let j = map.jet(s, p);
        let w = j.apply(v);
        let n = w.norm();
        acc += n.ln();
        v = Vector2::new(w.v1 / n, w.v2 / n);
        p = j.value;
    }
    acc
}

/// Unit tangent (max norm) of a graph with slope `s`.
pub fn graph_tangent(s: f64) -> Vector2 {
    Vector2::new(1.0, s).normalized()
}

/// Axis-aligned sampling box, clipped to the cylinder it is used with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Grid points per side.
    pub samples: usize,
}

impl BoxRegion {
    pub fn around(z: Point2, half_width: f64, half_height: f64, samples: usize) -> Self {
        BoxRegion {
            x: ((z.x - half_width).max(0.0), (z.x + half_width).min(1.0)),
            y: ((z.y - half_height).max(0.0), (z.y + half_height).min(1.0)),
            samples,
        }
    }

    fn grid(&self) -> impl Iterator<Item = Point2> + '_ {
        let m = self.samples.max(2);
        (0..m).flat_map(move |i| {
            (0..m).map(move |k| {
                let tx = i as f64 / (m - 1) as f64;
                let ty = k as f64 / (m - 1) as f64;
                Point2::new(self.x.0 + tx * (self.x.1 - self.x.0), self.y.0 + ty * (self.y.1 - self.y.0))
            })
        })
    }
}

/// Slice of (box ∩ E_word) through height `y`.
fn clipped_row(map: &PiecewiseMap, word: &[usize], region: &BoxRegion, y: f64) -> Option<(f64, f64)> {
    let (l, r) = post_cylinder_row(map, word, y)?;
    let (l, r) = (l.max(region.x.0), r.min(region.x.1));
    (r > l).then_some((l, r))
}

/// Sampled Θ_z(F^n, E) for E = region ∩ E_word, F^n the composition along
/// `word`.
pub fn theta(map: &PiecewiseMap, word: &[usize], z: Point2, region: &BoxRegion) -> Result<f64> {
    for &s in word {
        map.check_branch(s)?;
    }
    let (l, r) = clipped_row(map, word, region, z.y).ok_or(Error::OutOfDomain { x: z.x, y: z.y })?;
    if z.x < l || z.x > r {
        return Err(Error::OutOfDomain { x: z.x, y: z.y });
    }
    let delta = r - l;
    let sup = region
        .grid()
        .chain(std::iter::once(z))
        .filter(|w| clipped_row(map, word, region, w.y).is_some_and(|(a, b)| w.x >= a && w.x <= b))
        .map(|w| {
            let j = composition_jet(map, word, w);
            j.second_norm() / j.f1x().abs()
        })
        .fold(0.0, f64::max);
    Ok(sup * delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationCheck {
    /// |Df_z(v_z)| / |Df_w(v_w)| for the unit curve tangents.
    pub actual: f64,
    /// exp(C exp(CΘ) |z − w| / δ).
    pub bound: f64,
    pub theta: f64,
    pub delta: f64,
    pub separation: f64,
}

impl FluctuationCheck {
    /// The bound for another constant C.
    pub fn bound_for(&self, c: f64) -> f64 {
        (c * (c * self.theta).exp() * self.separation / self.delta).exp()
    }
}

/// Compare the one-step derivative ratio of branch `i` between the curve
/// points over `zx` and `wx` with the exponential fluctuation bound. The
/// region is the box of half-width `delta / 2` around z clipped to post i.
pub fn fluctuation_check(
    map: &PiecewiseMap,
    i: usize,
    curve: &CurveGraph,
    zx: f64,
    wx: f64,
    delta: f64,
    c: f64,
) -> Result<FluctuationCheck> {
    let z = Point2::new(zx, curve.value(zx));
    let w = Point2::new(wx, curve.value(wx));
    let half_h = (delta * curve.sup_slope()).max(1e-9);
    let region = BoxRegion::around(z, 0.5 * delta, half_h, 9);
    let th = theta(map, &[i], z, &region)?;
    let dz = (map.jet(i, z).apply(graph_tangent(curve.slope(zx)))).norm();
    let dw = (map.jet(i, w).apply(graph_tangent(curve.slope(wx)))).norm();
    let (l, r) = clipped_row(map, &[i], &region, z.y).unwrap_or((z.x, z.x));
    let width = (r - l).max(f64::MIN_POSITIVE);
    let mut f = FluctuationCheck { actual: dz / dw, bound: 0.0, theta: th, delta: width, separation: z.dist(&w) };
    f.bound = f.bound_for(c);
    Ok(f)
}

/// Smallest C (to relative precision 1e-6) with every `actual ≤ bound`
/// on the training pairs, times `safety`. Pairs are (zx, wx).
pub fn calibrate_c(
    map: &PiecewiseMap,
    i: usize,
    curve: &CurveGraph,
    pairs: &[(f64, f64)],
    delta: f64,
    safety: f64,
) -> Result<f64> {
    let checks = pairs
        .iter()
        .map(|&(z, w)| fluctuation_check(map, i, curve, z, w, delta, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let ok = |c: f64| checks.iter().all(|f| f.actual <= f.bound_for(c));
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::ContractionViolated { what: "fluctuation constant".into(), value: hi });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi * safety)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub depth: usize,
    pub theta: f64,
    pub ratio_max: f64,
    pub ratio_min: f64,
    /// exp(C exp(CΘ)) for the configured C: the fluctuation bound at
    /// separations up to the cylinder width.
    pub bound_rhs: f64,
    pub pairs: usize,
    /// Section of the curve inside the cylinder.
    pub section: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DistortionOptions {
    /// Curve points sampled inside the cylinder (all pairs are compared).
    pub points: usize,
    pub c: f64,
}

impl Default for DistortionOptions {
    fn default() -> Self {
        DistortionOptions { points: 48, c: 1.0 }
    }
}

/// Extremes of |DF^n_z(v_z)| / |DF^n_w(v_w)| over points of γ ∩ E_word,
/// where n = |word| and v are the unit tangents of γ.
pub fn composition_distortion(
    map: &PiecewiseMap,
    gamma: &CurveGraph,
    word: &[usize],
    opts: &DistortionOptions,
) -> Result<DistortionReport> {
    for &s in word {
        map.check_branch(s)?;
    }
    let g = |x: f64| gamma.value(x);
    let (lo, hi) = post_cylinder_on_curve(map, word, &g, gamma.lo(), gamma.hi())
        .ok_or(Error::EmptyCylinder { word: word.to_vec() })?;
    if hi - lo < 1e-14 {
        return Err(Error::DegenerateCylinder { word: word.to_vec(), width: hi - lo });
    }
    let m = opts.points.max(8);
    let logs: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let x = lo + (hi - lo) * (k as f64 + 0.5) / m as f64;
            log_growth(map, word, Point2::new(x, g(x)), graph_tangent(gamma.slope(x)))
        })
        .collect();
    let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lmin = logs.iter().copied().fold(f64::INFINITY, f64::min);

    let mid = 0.5 * (lo + hi);
    let z = Point2::new(mid, g(mid));
    let ys = (g(lo).min(g(hi)) - 1e-12, g(lo).max(g(hi)) + 1e-12);
    let region = BoxRegion { x: (lo, hi), y: (ys.0.max(0.0), ys.1.min(1.0)), samples: 9 };
    let th = theta(map, word, z, &region)?;
    Ok(DistortionReport {
        depth: word.len(),
        theta: th,
        ratio_max: (lmax - lmin).exp(),
        ratio_min: (lmin - lmax).exp(),
        bound_rhs: (opts.c * (opts.c * th).exp()).exp(),
        pairs: m * (m - 1) / 2,
        section: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_theta_and_ratios() {
        let b = PiecewiseMap::baker(2).unwrap();
        let region = BoxRegion { x: (0.0, 0.5), y: (0.0, 1.0), samples: 5 };
        assert_eq!(theta(&b, &[1], Point2::new(0.2, 0.3), &region).unwrap(), 0.0);
        let curve = CurveGraph::from_fn(0.0, 1.0, 257, |x| {
            let w = 2.0 * std::f64::consts::PI;
            (0.1 * (w * x).sin() + 0.5, 0.1 * w * (w * x).cos(), -0.1 * w * w * (w * x).sin())
        });
        let r = composition_distortion(&b, &curve, &[1, 2, 2, 1], &DistortionOptions::default()).unwrap();
        assert_eq!((r.ratio_max, r.ratio_min), (1.0, 1.0));
        let f = fluctuation_check(&b, 1, &curve, 0.2, 0.2, 0.1, 1.0).unwrap();
        assert_eq!(f.actual, 1.0);
        assert!(f.bound >= 1.0);
    }

    #[test]
    fn composition_jet_matches_power_map() {
        let l = PiecewiseMap::perturbed_lueroth(0.02).unwrap();
        let z = Point2::new(0.3, 0.6);
        let hit = l.branch_of(z).unwrap().index;
        let z1 = l.eval(hit, z);
        let hit1 = l.branch_of(z1).unwrap().index;
        let j = composition_jet(&l, &[hit, hit1], z);
        let p = l.power(2, 10_000).unwrap();
        let i = p.branch_for_word(&[hit, hit1]).unwrap();
        let q = p.jet(i, z);
        assert!((j.f1x() - q.f1x()).abs() < 1e-9 * q.f1x().abs());
        assert!((j.d2[1][0][1] - q.d2[1][0][1]).abs() < 1e-9 * (1.0 + q.d2[1][0][1].abs()));
    }

    #[test]
    fn degenerate_cylinders_are_reported() {
        let l = PiecewiseMap::lueroth();
        let flat = CurveGraph::constant(0.5, 65);
        let word = vec![999; 6];
        assert!(matches!(
            composition_distortion(&l, &flat, &word, &DistortionOptions::default()),
            Err(Error::DegenerateCylinder { .. }) | Err(Error::EmptyCylinder { .. })
        ));
    }
}
