//! Sinai local densities on unstable curves.
//!
//! ξ(x₁, x₂) = ∏_{s≥1} D^uF(F^{−s}z₁) / D^uF(F^{−s}z₂) for z_k = (x_k, g(x_k))
//! on the unstable manifold of a past. Preimages are found on the curves of
//! a single graph-transform pass (never by pulling points back through the
//! inverse, which expands the transverse error), and products are kept as
//! sums of logs.

use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::graph_tangent;
use crate::error::{Error, Result};
use crate::geometry::{PiecewiseMap, Point2};
use crate::graph_transform::{invert_base, unstable_chain, BranchChart, CurveGraph, DEFAULT_GRID};
use crate::numerics::gauss_legendre;
use crate::symbolic::Itinerary;

/// D^uF at (x, g(x)): |DF(v)| for the unit tangent v of the curve.
pub fn unstable_jacobian(map: &PiecewiseMap, curve: &CurveGraph, x: f64) -> Result<f64> {
    let z = Point2::new(x, curve.value(x));
    let j = map.jet_at(z)?;
    Ok(j.apply(graph_tangent(curve.slope(x))).norm())
}

/// Backward orbit data of one point: per-step log D^u and the preimages.
struct Backward {
    logs: Vec<f64>,
    points: Vec<Point2>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SinaiDensity {
    /// The unstable curve γ (C₀ of the pass).
    pub curve: CurveGraph,
    pub basepoint: f64,
    pub depth: usize,
    /// ξ(x₁, x) on the curve grid.
    pub xi: Vec<f64>,
    /// Bound on |log ξ_∞ − log ξ_depth| over the grid.
    pub log_tail_bound: f64,
    /// max over the grid of max(ξ, 1/ξ).
    pub k6: f64,
    #[serde(skip)]
    past: Vec<usize>,
    #[serde(skip)]
    chain: Vec<CurveGraph>,
    #[serde(skip)]
    map: PiecewiseMap,
    #[serde(skip)]
    log_base: f64,
    #[serde(skip)]
    lambda: Vec<f64>,
}

/// Floor for the rounding error of a difference of two log sums.
const ROUNDING_FLOOR: f64 = 1e-12;

impl SinaiDensity {
    /// Density along the unstable manifold of `past` (oldest first), with
    /// products truncated at `depth`. The pass needs past.len() > depth.
    pub fn new(map: &PiecewiseMap, past: &Itinerary, basepoint: f64, depth: usize) -> Result<Self> {
        Self::with_grid(map, past, basepoint, depth, DEFAULT_GRID)
    }

    pub fn with_grid(map: &PiecewiseMap, past: &Itinerary, basepoint: f64, depth: usize, grid: usize) -> Result<Self> {
        if depth == 0 || depth >= past.len() {
            return Err(Error::InsufficientPast { depth, available: past.len() });
        }
        let chain = unstable_chain(map, &past.symbols, depth, grid)?;
        let mut d = SinaiDensity {
            curve: chain[0].clone(),
            basepoint,
            depth,
            xi: Vec::new(),
            log_tail_bound: 0.0,
            k6: 1.0,
            past: past.symbols.clone(),
            chain,
            map: map.clone(),
            log_base: 0.0,
            lambda: Vec::new(),
        };
        let base = d.backward(basepoint)?;
        d.log_base = base.logs.iter().sum();
        let rows: Vec<Result<(f64, f64)>> = d
            .curve
            .grid
            .par_iter()
            .map(|&x| {
                let b = d.backward(x)?;
                let lam: f64 = b.logs.iter().sum();
                Ok((lam, d.tail(&base, &b)))
            })
            .collect();
        for r in rows {
            let (lam, t) = r?;
            d.lambda.push(lam);
            d.log_tail_bound = d.log_tail_bound.max(t);
        }
        d.xi = d.lambda.iter().map(|l| (d.log_base - l).exp()).collect();
        d.k6 = d.xi.iter().map(|&v| v.max(1.0 / v)).fold(1.0, f64::max);
        Ok(d)
    }

    fn backward(&self, x: f64) -> Result<Backward> {
        let l = self.past.len();
        let mut logs = Vec::with_capacity(self.depth);
        let mut points = Vec::with_capacity(self.depth);
        let mut xs = x;
        for s in 1..=self.depth {
            let a = self.past[l - s];
            let c = &self.chain[s];
            let u = invert_base(&BranchChart { map: &self.map, index: a }, c, xs)?;
            let w = Point2::new(u, c.value(u));
            let du = self.map.jet(a, w).apply(graph_tangent(c.slope(u))).norm();
            logs.push(du.ln());
            points.push(w);
            xs = u;
        }
        Ok(Backward { logs, points })
    }

    /// Geometric tail estimate for the pair: an empirical Lipschitz
    /// constant of log D^u along the backward orbits times the remaining
    /// separation sum Σ_{s>depth} sep·r^{s−depth}, r = 1/K₀, doubled.
    fn tail(&self, a: &Backward, b: &Backward) -> f64 {
        let mut lip: f64 = 0.0;
        for s in 0..self.depth {
            let sep = a.points[s].dist(&b.points[s]);
            if sep > 1e-12 {
                lip = lip.max((a.logs[s] - b.logs[s]).abs() / sep);
            }
        }
        let sep = a.points[self.depth - 1].dist(&b.points[self.depth - 1]);
        let r = 1.0 / self.map.cone.k0;
        2.0 * lip * sep * r / (1.0 - r) + ROUNDING_FLOOR
    }

    /// Λ(x) = Σ_{s≤depth} log D^u(F^{−s}(x, g(x))).
    pub fn log_product(&self, x: f64) -> Result<f64> {
        Ok(self.backward(x)?.logs.iter().sum())
    }

    /// ξ(x₁, x₂) for arbitrary points of the curve.
    pub fn ratio(&self, x1: f64, x2: f64) -> Result<f64> {
        Ok((self.log_product(x1)? - self.log_product(x2)?).exp())
    }

    /// ξ(basepoint, x).
    pub fn xi_at(&self, x: f64) -> Result<f64> {
        Ok((self.log_base - self.log_product(x)?).exp())
    }

    /// ν(A) = ∫_A ξ(x₁, x) dρ(x) over A = [a, b]. Curves are graphs with
    /// |Dg| < 1, so max-norm arclength is dx.
    pub fn local_measure(&self, a: f64, b: f64) -> Result<f64> {
        let pieces = 16;
        let h = (b - a) / pieces as f64;
        let vals: Vec<Result<f64>> = (0..pieces)
            .into_par_iter()
            .map(|p| {
                let lo = a + h * p as f64;
                let err = std::cell::RefCell::new(None);
                let v = gauss_legendre(
                    |x| match self.xi_at(x) {
                        Ok(v) => v,
                        Err(e) => {
                            err.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    },
                    lo,
                    lo + h,
                    1,
                );
                err.into_inner().map_or(Ok(v), Err)
            })
            .collect();
        vals.into_iter().sum()
    }

    /// Normalised CDF on the curve grid (trapezoid rule on ξ).
    pub fn cdf(&self) -> Vec<f64> {
        let g = &self.curve.grid;
        let mut c = vec![0.0; g.len()];
        for k in 1..g.len() {
            c[k] = c[k - 1] + 0.5 * (self.xi[k] + self.xi[k - 1]) * (g[k] - g[k - 1]);
        }
        let total = c[g.len() - 1];
        c.iter_mut().for_each(|v| *v /= total);
        c
    }
}

/// Truncated ξ(x₁, x₂) and an absolute bound on its truncation error.
pub fn sinai_density(map: &PiecewiseMap, past: &Itinerary, x1: f64, x2: f64, depth: usize) -> Result<(f64, f64)> {
    if depth == 0 || depth >= past.len() {
        return Err(Error::InsufficientPast { depth, available: past.len() });
    }
    let d = SinaiDensity::with_grid(map, past, x1, depth, DEFAULT_GRID)?;
    let a = d.backward(x1)?;
    let b = d.backward(x2)?;
    let xi = (a.logs.iter().sum::<f64>() - b.logs.iter().sum::<f64>()).exp();
    Ok((xi, xi * (d.tail(&a, &b).exp() - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_density_is_one() {
        let b = PiecewiseMap::baker(2).unwrap();
        let past = Itinerary::backward(vec![1, 2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 2, 1, 1, 2, 1, 2, 1, 2, 2]).unwrap();
        let d = SinaiDensity::new(&b, &past, 0.3, 10).unwrap();
        assert!(d.xi.iter().all(|&v| v == 1.0));
        assert_eq!(d.local_measure(0.0, 0.5).unwrap(), 0.5);
        let l = PiecewiseMap::lueroth();
        let past = Itinerary::backward(vec![3, 1, 2, 5, 1, 1, 2, 4, 1, 2, 1, 3]).unwrap();
        let (xi, _) = sinai_density(&l, &past, 0.1, 0.9, 6).unwrap();
        assert_eq!(xi, 1.0);
    }

    #[test]
    fn unstable_jacobian_of_horizontal_curves() {
        let flat = CurveGraph::constant(0.3, 17);
        let b = PiecewiseMap::baker(2).unwrap();
        assert_eq!(unstable_jacobian(&b, &flat, 0.7).unwrap(), 2.0);
        let l = PiecewiseMap::lueroth();
        assert_eq!(unstable_jacobian(&l, &flat, 0.4).unwrap(), 6.0);
    }

    #[test]
    fn insufficient_past() {
        let b = PiecewiseMap::baker(2).unwrap();
        let past = Itinerary::backward(vec![1; 5]).unwrap();
        assert!(matches!(sinai_density(&b, &past, 0.1, 0.2, 5), Err(Error::InsufficientPast { .. })));
    }
}
