//! The graph transform on C² curve graphs.
//!
//! For a branch f and a curve y = g(x), Γ(f, g) = f₂∘(1, g)∘[f₁∘(1, g)]⁻¹ is
//! the graph of f(graph g). Alongside the values we transport the slope
//! (R₁) and the curvature (R₂):
//!
//! ```text
//! D₁ = 1 / (f1x + f1y H)
//! D₂ = −D₁ (f1xx + 2 f1xy H + f1yy H² + f1y J) D₁²
//! R₁ = (f2x + f2y H) D₁
//! R₂ = (f2xx + 2 f2xy H + f2yy H² + f2y J) D₁² + (f2x + f2y H) D₂
//! ```
//!
//! with every partial taken at (u, g(u)), u = [f₁∘(1, g)]⁻¹(x), and H, J the
//! slope and curvature at u. Iterating Γ along a backward itinerary from
//! constant seeds converges to the unstable manifold; on swapped inverse
//! branches it gives stable manifolds as graphs x = h(y).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Jet, PiecewiseMap, Point2};
use crate::numerics::solve_monotone;
use crate::symbolic::Itinerary;

/// Default number of samples per curve.
pub const DEFAULT_GRID: usize = 257;

/// Sampled C² graph over `[lo, hi]` with cubic Hermite values (from g, Dg),
/// cubic Hermite slopes (from Dg, D²g) and linear curvature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveGraph {
    pub grid: Vec<f64>,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
}

fn uniform_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|k| if k + 1 == m { hi } else { lo + (hi - lo) * k as f64 / (m - 1) as f64 }).collect()
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

impl CurveGraph {
    pub fn from_fn<F: Fn(f64) -> (f64, f64, f64)>(lo: f64, hi: f64, m: usize, f: F) -> Self {
        let grid = uniform_grid(lo, hi, m.max(2));
        let (mut g, mut dg, mut d2g) = (Vec::new(), Vec::new(), Vec::new());
        for &x in &grid {
            let (a, b, c) = f(x);
            g.push(a);
            dg.push(b);
            d2g.push(c);
        }
        CurveGraph { grid, g, dg, d2g }
    }

    /// The horizontal (or, in swapped use, vertical) line at height `c`.
    pub fn constant(c: f64, m: usize) -> Self {
        Self::from_fn(0.0, 1.0, m, |_| (c, 0.0, 0.0))
    }

    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    fn cell(&self, x: f64) -> (usize, f64, f64) {
        let n = self.grid.len();
        let k = self.grid.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let h = self.grid[k + 1] - self.grid[k];
        (k, (x - self.grid[k]) / h, h)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (k, t, h) = self.cell(x);
        hermite(self.g[k], self.g[k + 1], self.dg[k], self.dg[k + 1], h, t)
    }

    pub fn slope(&self, x: f64) -> f64 {
        let (k, t, h) = self.cell(x);
        hermite(self.dg[k], self.dg[k + 1], self.d2g[k], self.d2g[k + 1], h, t)
    }

    pub fn curvature(&self, x: f64) -> f64 {
        let (k, t, _) = self.cell(x);
        self.d2g[k] + t * (self.d2g[k + 1] - self.d2g[k])
    }

    pub fn sup_slope(&self) -> f64 {
        self.dg.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_curvature(&self) -> f64 {
        self.d2g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-distances (d0, d1, d2) of the three components, evaluating
    /// `other` at this curve's grid points.
    pub fn distance(&self, other: &CurveGraph) -> (f64, f64, f64) {
        let same = self.grid == other.grid;
        let mut d = (0.0f64, 0.0f64, 0.0f64);
        for (k, &x) in self.grid.iter().enumerate() {
            let (g, dg, d2g) = if same {
                (other.g[k], other.dg[k], other.d2g[k])
            } else {
                (other.value(x), other.slope(x), other.curvature(x))
            };
            d.0 = d.0.max((self.g[k] - g).abs());
            d.1 = d.1.max((self.dg[k] - dg).abs());
            d.2 = d.2.max((self.d2g[k] - d2g).abs());
        }
        d
    }
}

/// A map of the plane that the transform can push graphs through.
pub trait Chart: Sync {
    fn jet(&self, x: f64, y: f64) -> Jet;
    fn value(&self, x: f64, y: f64) -> Point2 {
        self.jet(x, y).value
    }
}

/// Branch f_i of a map.
pub struct BranchChart<'a> {
    pub map: &'a PiecewiseMap,
    pub index: usize,
}

impl Chart for BranchChart<'_> {
    fn jet(&self, x: f64, y: f64) -> Jet {
        self.map.jet(self.index, Point2::new(x, y))
    }
    fn value(&self, x: f64, y: f64) -> Point2 {
        self.map.eval(self.index, Point2::new(x, y))
    }
}

/// s∘f_i⁻¹∘s with s(x, y) = (y, x): in these coordinates stable curves are
/// graphs over the first coordinate and the inverse branch expands it.
pub struct SwappedInverseChart<'a> {
    pub map: &'a PiecewiseMap,
    pub index: usize,
}

impl Chart for SwappedInverseChart<'_> {
    fn jet(&self, a: f64, b: f64) -> Jet {
        let w = Point2::new(b, a);
        match self.map.inverse(self.index, w) {
            Ok(z) => self.map.jet(self.index, z).inverse(z).swapped(),
            Err(_) => Jet::affine(Point2::new(f64::NAN, f64::NAN), [[f64::NAN; 2]; 2]),
        }
    }
    fn value(&self, a: f64, b: f64) -> Point2 {
        match self.map.inverse(self.index, Point2::new(b, a)) {
            Ok(z) => Point2::new(z.y, z.x),
            Err(_) => Point2::new(f64::NAN, f64::NAN),
        }
    }
}

/// u with f₁(u, g(u)) = x, by safeguarded Newton on the curve's domain.
pub fn invert_base<C: Chart + ?Sized>(f: &C, g: &CurveGraph, x: f64) -> Result<f64> {
    let base = |t: f64| {
        let j = f.jet(t, g.value(t));
        (j.value.x, j.f1x() + j.f1y() * g.slope(t))
    };
    let (lo, hi) = (g.lo(), g.hi());
    let (a, b) = (f.value(lo, g.value(lo)).x, f.value(hi, g.value(hi)).x);
    let (mn, mx) = (a.min(b), a.max(b));
    if !(x >= mn - 1e-13 && x <= mx + 1e-13) {
        return Err(Error::OutOfImage { x, lo: mn, hi: mx });
    }
    if x <= mn {
        return Ok(if a <= b { lo } else { hi });
    }
    if x >= mx {
        return Ok(if a <= b { hi } else { lo });
    }
    let guess = lo + (hi - lo) * (x - a) / (b - a);
    let u = solve_monotone(base, x, lo, hi, guess)?;
    let r = (f.value(u, g.value(u)).x - x).abs();
    if r > 1e-12 * x.abs().max(1.0) {
        return Err(Error::RootFailed(format!("base inversion residual {r:e} at x = {x}")));
    }
    Ok(u)
}

/// Pointwise transport data at one output abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transported {
    pub u: f64,
    pub value: f64,
    pub r1: f64,
    pub r2: f64,
    /// Smallness ratios |f1y|/|f1x|, |f2x|/|f1x|, |f2y|/|f1x|.
    pub eps: [f64; 3],
    pub a1: f64,
    pub a2: f64,
}

/// Γ, R₁ and R₂ at output abscissa `x`, with slope `h(u)` and curvature
/// `j(u)` supplied as functions on the input domain.
pub fn transport_at<C, H, J>(f: &C, g: &CurveGraph, h: H, j: J, x: f64) -> Result<Transported>
where
    C: Chart + ?Sized,
    H: Fn(f64) -> f64,
    J: Fn(f64) -> f64,
{
    let u = invert_base(f, g, x)?;
    let jet = f.jet(u, g.value(u));
    let (hu, ju) = (h(u), j(u));
    let [[f1xx, f1xy], [_, f1yy]] = jet.d2[0];
    let [[f2xx, f2xy], [_, f2yy]] = jet.d2[1];
    let d1 = 1.0 / (jet.f1x() + jet.f1y() * hu);
    let d2 = -d1 * (f1xx + 2.0 * f1xy * hu + f1yy * hu * hu + jet.f1y() * ju) * d1 * d1;
    let r1 = (jet.f2x() + jet.f2y() * hu) * d1;
    let r2 = (f2xx + 2.0 * f2xy * hu + f2yy * hu * hu + jet.f2y() * ju) * d1 * d1 + (jet.f2x() + jet.f2y() * hu) * d2;
    let f1x = jet.f1x().abs();
    let e12 = jet.f1y().abs() / f1x;
    let e21 = jet.f2x().abs() / f1x;
    let e22 = jet.f2y().abs() / f1x;
    let q = 1.0 - e12;
    let dd = jet.second_norm();
    let a1 = 4.0 * dd / (f1x * f1x * q * q) + (e21 + e22) * 4.0 * dd / (q.powi(3) * f1x * f1x);
    let a2 = (e21 + e22) * e12 / (q.powi(3) * f1x) + e22 / (q * q * f1x);
    Ok(Transported { u, value: jet.value.y, r1, r2, eps: [e12, e21, e22], a1, a2 })
}

/// R₁(f, g, H) at `x`.
pub fn r1<C: Chart + ?Sized, H: Fn(f64) -> f64>(f: &C, g: &CurveGraph, h: H, x: f64) -> Result<f64> {
    let t = transport_at(f, g, h, |_| 0.0, x)?;
    if t.r1.abs() > 1.0 + 1e-9 {
        return Err(Error::ContractionViolated { what: "|R1|".into(), value: t.r1.abs() });
    }
    Ok(t.r1)
}

/// R₂(f, g, H, J) at `x`.
pub fn r2<C, H, J>(f: &C, g: &CurveGraph, h: H, j: J, x: f64) -> Result<f64>
where
    C: Chart + ?Sized,
    H: Fn(f64) -> f64,
    J: Fn(f64) -> f64,
{
    let t = transport_at(f, g, h, j, x)?;
    if t.a2 >= 1.0 {
        return Err(Error::ContractionViolated { what: "A2".into(), value: t.a2 });
    }
    Ok(t.r2)
}

/// Extremes of the transport bookkeeping over one or more Γ steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportStats {
    pub max_r1: f64,
    pub max_a1: f64,
    pub max_a2: f64,
    /// Slack of the three smallness inequalities (positive = holds).
    pub slack: [f64; 3],
}

impl Default for TransportStats {
    fn default() -> Self {
        TransportStats { max_r1: 0.0, max_a1: 0.0, max_a2: 0.0, slack: [f64::INFINITY; 3] }
    }
}

/// Γ(f, g) with its slope and curvature, sampled on `grid`.
pub fn gamma<C: Chart + ?Sized>(f: &C, g: &CurveGraph, grid: &[f64], stats: &mut TransportStats) -> Result<CurveGraph> {
    let mut out = CurveGraph { grid: grid.to_vec(), g: Vec::new(), dg: Vec::new(), d2g: Vec::new() };
    for &x in grid {
        let t = transport_at(f, g, |u| g.slope(u), |u| g.curvature(u), x)?;
        let [e12, e21, e22] = t.eps;
        let q = 1.0 - e12;
        let s39 = 1.0 - (e21 + e22) / q;
        let s40 = 1.0 - (e22 / q + e21 * e12 / (q * q) + e22 * e12 / (q * q));
        stats.max_r1 = stats.max_r1.max(t.r1.abs());
        stats.max_a1 = stats.max_a1.max(t.a1);
        stats.max_a2 = stats.max_a2.max(t.a2);
        stats.slack = [stats.slack[0].min(s39), stats.slack[1].min(s40), stats.slack[2].min(1.0 - t.a2)];
        if t.r1.abs() > 1.0 + 1e-9 {
            return Err(Error::ContractionViolated { what: "|R1|".into(), value: t.r1.abs() });
        }
        if t.a2 >= 1.0 {
            return Err(Error::ContractionViolated { what: "A2".into(), value: t.a2 });
        }
        out.g.push(t.value);
        out.dg.push(t.r1);
        out.d2g.push(t.r2);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ManifoldOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub grid_points: usize,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        ManifoldOptions { tol: 1e-10, max_iter: 80, grid_points: DEFAULT_GRID }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformDiagnostics {
    /// Sup-distances between successive approximations G_{n−1}, G_n.
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// Ratios d0[n]/d0[n−1].
    pub contraction: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stats: TransportStats,
    /// Second-derivative bound K₂ = K̃·Ã₁ with K̃ = 1.01/(1 − Ã₂).
    pub k2: f64,
}

/// Iterate Γ from constant seeds. `charts[k]` is applied after
/// `charts[k−1]`; approximation n starts from the constant `seeds[L−n]`
/// and applies the last n charts.
fn iterate<C: Chart>(charts: &[C], seeds: &[f64], opts: &ManifoldOptions) -> Result<(CurveGraph, TransformDiagnostics)> {
    let len = charts.len();
    let grid = uniform_grid(0.0, 1.0, opts.grid_points.max(2));
    let mut stats = TransportStats::default();
    let mut diag = TransformDiagnostics {
        d0: Vec::new(),
        d1: Vec::new(),
        d2: Vec::new(),
        contraction: Vec::new(),
        iterations: 0,
        converged: false,
        stats,
        k2: 0.0,
    };
    let mut prev: Option<CurveGraph> = None;
    for n in 1..=len.min(opts.max_iter) {
        let start = len - n;
        let mut curve = CurveGraph::from_fn(0.0, 1.0, grid.len(), |_| (seeds[start], 0.0, 0.0));
        for c in &charts[start..] {
            curve = gamma(c, &curve, &grid, &mut stats)?;
        }
        diag.iterations = n;
        if let Some(p) = &prev {
            let (d0, d1, d2) = curve.distance(p);
            if let Some(&last) = diag.d0.last() {
                diag.contraction.push(if last > 0.0 { d0 / last } else { 0.0 });
            }
            diag.d0.push(d0);
            diag.d1.push(d1);
            diag.d2.push(d2);
            if d0 < opts.tol && d1 < opts.tol && d2 < opts.tol {
                diag.converged = true;
                diag.stats = stats;
                diag.k2 = 1.01 / (1.0 - stats.max_a2) * stats.max_a1;
                return Ok((curve, diag));
            }
        }
        prev = Some(curve);
    }
    Err(Error::NotConverged { iterations: diag.iterations, d0: diag.d0.last().copied().unwrap_or(f64::NAN) })
}

fn midpoint_if_outside(v: f64, (l, r): (f64, f64)) -> f64 {
    if v >= l && v <= r {
        v
    } else {
        0.5 * (l + r)
    }
}

/// y-coordinates of a pseudo-orbit following `past`: position k is the
/// point before symbol k is applied (position L is the present).
fn forward_seed_heights(map: &PiecewiseMap, past: &[usize]) -> Vec<f64> {
    let mut p = Point2::new(0.5, 0.5);
    let mut ys = vec![p.y];
    for &s in past {
        p.x = midpoint_if_outside(p.x, map.post_bounds(s, p.y));
        p = map.eval(s, p);
        p.y = p.y.clamp(0.0, 1.0);
        ys.push(p.y);
    }
    ys
}

fn check_symbols(map: &PiecewiseMap, it: &Itinerary) -> Result<()> {
    it.symbols.iter().try_for_each(|&s| map.check_branch(s))
}

/// Unstable manifold W^u of the backward itinerary `past` (oldest symbol
/// first) as a full-width graph y = g(x). Approximation n is Γ applied
/// along the last n symbols to the constant curve through the height of a
/// pseudo-orbit at that depth, so every approximation passes through the
/// same present point.
pub fn unstable_manifold(map: &PiecewiseMap, past: &Itinerary, opts: &ManifoldOptions) -> Result<(CurveGraph, TransformDiagnostics)> {
    check_symbols(map, past)?;
    let seeds = forward_seed_heights(map, &past.symbols);
    let charts: Vec<BranchChart> = past.symbols.iter().map(|&s| BranchChart { map, index: s }).collect();
    iterate(&charts, &seeds, opts)
}

/// Stable manifold W^s of the forward itinerary `future` as a full-height
/// graph x = h(y) (the returned curve's abscissa is y).
pub fn stable_manifold(map: &PiecewiseMap, future: &Itinerary, opts: &ManifoldOptions) -> Result<(CurveGraph, TransformDiagnostics)> {
    check_symbols(map, future)?;
    let syms = &future.symbols;
    let len = syms.len();
    // x-coordinates of a backward pseudo-orbit; xs[k] sits before symbol k.
    let mut xs = vec![0.0; len + 1];
    let mut q = Point2::new(0.5, 0.5);
    xs[len] = q.x;
    for k in (0..len).rev() {
        q.y = midpoint_if_outside(q.y, map.strip_bounds(syms[k], q.x));
        q = map.inverse(syms[k], q)?;
        q.x = q.x.clamp(0.0, 1.0);
        xs[k] = q.x;
    }
    // Application order a_{L-1}, …, a_0; seed before chart k is xs[L-k].
    let charts: Vec<SwappedInverseChart> = syms.iter().rev().map(|&s| SwappedInverseChart { map, index: s }).collect();
    let seeds: Vec<f64> = (0..len).map(|k| xs[len - k]).collect();
    iterate(&charts, &seeds, opts)
}

/// Curves C_0, C_1, …, C_depth of one Γ pass along `past`: C_s is the image
/// after all but the last s symbols, so branch past[L−1−s] maps C_{s+1}
/// onto C_s. C_0 is the unstable manifold once L − depth exceeds the
/// convergence depth.
pub fn unstable_chain(map: &PiecewiseMap, past: &[usize], depth: usize, grid_points: usize) -> Result<Vec<CurveGraph>> {
    if depth >= past.len() {
        return Err(Error::InsufficientPast { depth, available: past.len() });
    }
    for &s in past {
        map.check_branch(s)?;
    }
    let seeds = forward_seed_heights(map, past);
    let grid = uniform_grid(0.0, 1.0, grid_points.max(2));
    let mut stats = TransportStats::default();
    let mut curve = CurveGraph::from_fn(0.0, 1.0, grid.len(), |_| (seeds[0], 0.0, 0.0));
    let mut history = Vec::with_capacity(past.len());
    for &s in past {
        curve = gamma(&BranchChart { map, index: s }, &curve, &grid, &mut stats)?;
        history.push(curve.clone());
    }
    // history[k] is after k+1 symbols; C_s = history[L-1-s].
    Ok((0..=depth).map(|s| history[past.len() - 1 - s].clone()).collect())
}

/// Sup-distances between the unstable manifolds of two pasts.
pub fn manifold_continuity(map: &PiecewiseMap, past1: &Itinerary, past2: &Itinerary, opts: &ManifoldOptions) -> Result<(f64, f64, f64)> {
    let (a, _) = unstable_manifold(map, past1, opts)?;
    let (b, _) = unstable_manifold(map, past2, opts)?;
    Ok(a.distance(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_of_constant_curves() {
        let b = PiecewiseMap::baker(2).unwrap();
        let g = CurveGraph::constant(0.3, 33);
        let mut st = TransportStats::default();
        let out = gamma(&BranchChart { map: &b, index: 1 }, &g, &g.grid, &mut st).unwrap();
        assert!(out.g.iter().all(|&v| v == 0.15));
        let l = PiecewiseMap::lueroth();
        let out = gamma(&BranchChart { map: &l, index: 3 }, &g, &g.grid, &mut st).unwrap();
        let want = (1.0 - 1.0 / 3.0) + 0.3 / 12.0;
        assert!(out.g.iter().all(|&v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn invert_base_examples() {
        let l = PiecewiseMap::lueroth();
        let g = CurveGraph::constant(0.4, 17);
        let u = invert_base(&BranchChart { map: &l, index: 3 }, &g, 0.5).unwrap();
        assert!((u - 7.0 / 24.0).abs() < 1e-15);
        let b = PiecewiseMap::baker(2).unwrap();
        let wavy = CurveGraph::from_fn(0.0, 1.0, 65, |x| (0.5 + 0.1 * x.sin(), 0.1 * x.cos(), -0.1 * x.sin()));
        let u = invert_base(&BranchChart { map: &b, index: 1 }, &wavy, 0.8).unwrap();
        assert!((u - 0.4).abs() < 1e-15);
        assert!(matches!(
            invert_base(&BranchChart { map: &b, index: 1 }, &wavy, 2.5),
            Err(Error::OutOfImage { .. })
        ));
    }

    #[test]
    fn r1_r2_on_affine_branches() {
        let b = PiecewiseMap::baker(2).unwrap();
        let g = CurveGraph::constant(0.3, 9);
        let f = BranchChart { map: &b, index: 1 };
        assert_eq!(r1(&f, &g, |_| 0.5, 0.3).unwrap(), 0.125);
        let l = PiecewiseMap::lueroth();
        let f = BranchChart { map: &l, index: 2 };
        // R2 = f2y · j · D1² = (1/6) · j / 36.
        let v = r2(&f, &g, |_| 0.0, |_| 0.6, 0.5).unwrap();
        assert!((v - 0.6 / 6.0 / 36.0).abs() < 1e-16);
        assert_eq!(r2(&f, &g, |_| 0.2, |_| 0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn affine_unstable_manifolds_are_flat() {
        let b = PiecewiseMap::baker(2).unwrap();
        let past = Itinerary::backward(vec![1; 60]).unwrap();
        let (c, d) = unstable_manifold(&b, &past, &ManifoldOptions::default()).unwrap();
        assert!(d.converged && d.iterations <= 3);
        assert!(c.g.iter().all(|&v| v.abs() < 1e-12));
        assert!(c.d2g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stable_manifold_of_lueroth_fixed_point() {
        let l = PiecewiseMap::lueroth();
        let fut = Itinerary::forward(vec![3; 40]).unwrap();
        let (c, d) = stable_manifold(&l, &fut, &ManifoldOptions::default()).unwrap();
        assert!(d.converged);
        assert!(c.g.iter().all(|&v| (v - 3.0 / 11.0).abs() < 1e-14));
    }
}
