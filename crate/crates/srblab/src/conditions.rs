//! Sampled verification of the hyperbolicity conditions H1–H4, the cone
//! properties they imply, the derivative estimates that follow from them,
//! the distortion condition D1 and the geometric series condition G3.
//!
//! Margins are plain floating-point evaluations of exact jets at grid
//! points; a positive margin means the inequality holds at every sample.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{ConeParams, Jet, PiecewiseMap, Point2, Vector2};

/// Sampling grid: `nx × ny` points per post over branches
/// `branch_lo..=branch_hi` (clipped to the enumerated branches).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub branch_lo: usize,
    pub branch_hi: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 32, ny: 32, branch_lo: 1, branch_hi: 100 }
    }
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, branch_lo: usize, branch_hi: usize) -> Self {
        GridSpec { nx, ny, branch_lo, branch_hi }
    }

    fn branches(&self, map: &PiecewiseMap) -> std::ops::RangeInclusive<usize> {
        self.branch_lo.max(1)..=self.branch_hi.min(map.branch_limit())
    }

    /// Sample points of post `i`: `ny` rows from y = 0 to 1, each with `nx`
    /// points spanning the closed post row.
    pub fn post_samples(&self, map: &PiecewiseMap, i: usize) -> Vec<Point2> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        let frac = |k: usize, m: usize| if m <= 1 { 0.5 } else { k as f64 / (m - 1) as f64 };
        for j in 0..self.ny {
            let y = frac(j, self.ny);
            let (l, r) = map.post_bounds(i, y);
            for k in 0..self.nx {
                out.push(Point2::new(l + (r - l) * frac(k, self.nx), y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionMargin {
    pub name: String,
    pub min_margin: f64,
    pub worst_point: Point2,
    pub worst_branch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionMargin>,
    pub samples: usize,
    /// Extra sampled quantities (e.g. the D1 supremum).
    pub statistics: BTreeMap<String, f64>,
    pub tail_note: Option<String>,
}

/// Margins at or above this count as satisfied (exact-equality conditions
/// such as H2 for affine maps land on 0 up to rounding).
pub const MARGIN_TOL: f64 = -1e-12;

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionMargin> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn margin(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |c| c.min_margin)
    }

    pub fn all_satisfied(&self) -> bool {
        self.conditions.iter().all(|c| c.min_margin >= MARGIN_TOL)
    }
}

/// Evaluate `margins(i, z, jet)` (a fixed-length list) at every grid
/// sample and keep the minimum of each, reducing in branch order.
fn sweep<const K: usize, M>(map: &PiecewiseMap, grid: &GridSpec, names: [&str; K], margins: M) -> ConditionReport
where
    M: Fn(usize, Point2, &Jet) -> [f64; K] + Sync,
{
    let branches: Vec<usize> = grid.branches(map).collect();
    let per_branch: Vec<([(f64, Point2); K], usize)> = branches
        .par_iter()
        .map(|&i| {
            let mut worst = [(f64::INFINITY, Point2::new(f64::NAN, f64::NAN)); K];
            let pts = grid.post_samples(map, i);
            for &z in &pts {
                let jet = map.jet(i, z);
                let m = margins(i, z, &jet);
                for k in 0..K {
                    // NaN margins are treated as violations.
                    let v = if m[k].is_nan() { f64::NEG_INFINITY } else { m[k] };
                    if v < worst[k].0 {
                        worst[k] = (v, z);
                    }
                }
            }
            (worst, pts.len())
        })
        .collect();
    let mut conditions: Vec<ConditionMargin> = names
        .iter()
        .map(|n| ConditionMargin {
            name: n.to_string(),
            min_margin: f64::INFINITY,
            worst_point: Point2::new(f64::NAN, f64::NAN),
            worst_branch: 0,
        })
        .collect();
    let mut samples = 0;
    for (b, (worst, count)) in branches.iter().zip(per_branch) {
        samples += count;
        for k in 0..K {
            if worst[k].0 < conditions[k].min_margin {
                conditions[k].min_margin = worst[k].0;
                conditions[k].worst_point = worst[k].1;
                conditions[k].worst_branch = *b;
            }
        }
    }
    let tail_note = map.is_countable().then(|| {
        let hi = grid.branches(map).end().to_owned();
        format!(
            "countable family sampled on branches {}..={}; posts beyond carry width {:.3e} at y = 1/2",
            grid.branch_lo.max(1),
            hi,
            tail_after(map, hi)
        )
    });
    ConditionReport { conditions, samples, statistics: BTreeMap::new(), tail_note }
}

fn tail_after(map: &PiecewiseMap, hi: usize) -> f64 {
    let mut s = 0.0;
    for i in 1..=hi {
        let (l, r) = map.post_bounds(i, 0.5);
        s += r - l;
    }
    1.0 - s
}

/// H1–H4 margins at every grid sample.
pub fn check_hyperbolicity(map: &PiecewiseMap, cone: ConeParams, grid: &GridSpec) -> ConditionReport {
    let (a, k0) = (cone.alpha, cone.k0);
    sweep(map, grid, ["H1", "H2", "H3", "H4"], |_, _, j| {
        let (f1x, f1y, f2x, f2y) = (j.f1x().abs(), j.f1y().abs(), j.f2x().abs(), j.f2y().abs());
        let det = j.det().abs();
        [
            a * f1x - (f2x + a * f2y + a * a * f1y),
            f1x - a * f1y - k0,
            a * f1x - (f1y + a * f2y + a * a * f2x),
            f1x - a * f2x - det * k0,
        ]
    })
}

/// Cone invariance and expansion on the boundary rays of both cones:
/// DF maps (1, ±α) into K^u with |DF v| ≥ K0, and DF⁻¹ maps (±α, 1) into
/// K^s with |DF⁻¹ v| ≥ K0. The two ray images must also lie in the same
/// half-cone, so the whole cone (not only its edges) is mapped inside.
pub fn check_cone_properties(map: &PiecewiseMap, cone: ConeParams, grid: &GridSpec) -> ConditionReport {
    let (a, k0) = (cone.alpha, cone.k0);
    sweep(
        map,
        grid,
        ["cone_unstable", "expansion_unstable", "cone_stable", "expansion_stable"],
        |_, _, j| {
            let up = j.apply(Vector2::new(1.0, a));
            let dn = j.apply(Vector2::new(1.0, -a));
            let mut cu = (a * up.v1.abs() - up.v2.abs()).min(a * dn.v1.abs() - dn.v2.abs());
            if up.v1.signum() != dn.v1.signum() {
                cu = cu.min(-up.v1.abs().min(dn.v1.abs()));
            }
            let eu = (up.norm() - k0).min(dn.norm() - k0);
            let inv = j.inverse(j.value);
            let sp = inv.apply(Vector2::new(a, 1.0));
            let sm = inv.apply(Vector2::new(-a, 1.0));
            let mut cs = (a * sp.v2.abs() - sp.v1.abs()).min(a * sm.v2.abs() - sm.v1.abs());
            if sp.v2.signum() != sm.v2.signum() {
                cs = cs.min(-sp.v2.abs().min(sm.v2.abs()));
            }
            let es = (sp.norm() - k0).min(sm.norm() - k0);
            [cu, eu, cs, es]
        },
    )
}

/// Derivative ratio bounds |f1y|/|f1x| ≤ α, |f2x|/|f1x| ≤ α and
/// |f2y|/|f1x| ≤ 1/K0² + α², reported as margins (bound − ratio).
pub fn check_lemma41(map: &PiecewiseMap, grid: &GridSpec) -> ConditionReport {
    let (a, k0) = (map.cone.alpha, map.cone.k0);
    let b22 = 1.0 / (k0 * k0) + a * a;
    let mut rep = sweep(map, grid, ["f1y_over_f1x", "f2x_over_f1x", "f2y_over_f1x"], |_, _, j| {
        let f1x = j.f1x().abs();
        [a - j.f1y().abs() / f1x, a - j.f2x().abs() / f1x, b22 - j.f2y().abs() / f1x]
    });
    let bounds = [a, a, b22];
    for (c, b) in rep.conditions.clone().iter().zip(bounds) {
        rep.statistics.insert(format!("max_{}", c.name), b - c.min_margin);
    }
    rep
}

/// D1: sampled supremum of |D²f_i(z)|·δ_z(E_i)/|f_{i1x}(z)|. The reported
/// margin is C0 − sup; the supremum itself is in `statistics["D1_sup"]`.
pub fn check_distortion_d1(map: &PiecewiseMap, grid: &GridSpec) -> ConditionReport {
    let c0 = map.c0;
    let mut rep = sweep(map, grid, ["D1"], |i, z, j| {
        let (l, r) = map.post_bounds(i, z.y);
        [c0 - j.second_norm() * (r - l) / j.f1x().abs()]
    });
    let sup = c0 - rep.conditions[0].min_margin;
    rep.statistics.insert("D1_sup".into(), sup);
    rep
}

/// Largest K0 for which H2 and H4 hold at every sample, given α.
pub fn achievable_k0(map: &PiecewiseMap, alpha: f64, grid: &GridSpec) -> f64 {
    let rep = sweep(map, grid, ["K0"], |_, _, j| {
        let (f1x, f1y, f2x) = (j.f1x().abs(), j.f1y().abs(), j.f2x().abs());
        [(f1x - alpha * f1y).min((f1x - alpha * f2x) / j.det().abs())]
    });
    rep.conditions[0].min_margin
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G3Report {
    pub partial_sum: f64,
    pub last_term: f64,
    pub branches: usize,
    /// Terms failed to decrease over the last decade of indices.
    pub diverging: bool,
}

/// y-levels for δ_max/δ_min: 128 interior values plus both endpoints.
pub const G3_LEVELS: usize = 128;

/// −Σ_{i ≤ N} δ_{i,max} log δ_{i,min}, with δ_{i,max}, δ_{i,min} the extreme
/// post widths over the sampled y-levels. Finite families use all branches.
pub fn check_g3(map: &PiecewiseMap, n_max: usize) -> G3Report {
    let n = map.family().branch_count().map_or(n_max, |c| c.min(n_max));
    let levels: Vec<f64> = (0..G3_LEVELS + 2).map(|k| k as f64 / (G3_LEVELS + 1) as f64).collect();
    let widths: Vec<(f64, f64)> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &y in &levels {
                let (l, r) = map.post_bounds(i, y);
                lo = lo.min(r - l);
                hi = hi.max(r - l);
            }
            (hi, lo)
        })
        .collect();
    let (dmax, dmin): (Vec<f64>, Vec<f64>) = widths.into_iter().unzip();
    g3_series(&dmax, &dmin)
}

/// G3 partial sum for explicit width sequences.
pub fn g3_series(delta_max: &[f64], delta_min: &[f64]) -> G3Report {
    let terms: Vec<f64> = delta_max
        .iter()
        .zip(delta_min)
        .map(|(&a, &b)| if a == 0.0 { 0.0 } else { -a * b.ln() })
        .collect();
    let partial_sum: f64 = terms.iter().sum();
    let n = terms.len();
    let last_term = terms.last().copied().unwrap_or(0.0);
    let diverging = !partial_sum.is_finite() || (n >= 20 && last_term >= terms[n / 10 - 1]);
    G3Report { partial_sum, last_term, branches: n, diverging }
}

/// Both summation orders of Σ_{n≥1} Σ_{i∈D_n} x_i, D_n = {i : y_i ≤ e^{−εn}}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSum {
    /// Row by row over n.
    pub direct: f64,
    /// Σ_j j·c_j with c_j the x-mass of E_j = {i : e^{−ε(j+1)} < y_i ≤ e^{−εj}}.
    pub regrouped: f64,
}

/// Relative slack for y_i landing on a threshold e^{−εn} up to rounding;
/// such ties count as members (the inequality is closed).
const TIE: f64 = 1e-9;

pub fn tail_sum(x: &[f64], y: &[f64], eps: f64) -> TailSum {
    // t_i = −log(y_i)/ε; i ∈ D_n ⇔ n ≤ t_i, and i ∈ E_j ⇔ j = ⌊t_i⌋.
    let t: Vec<f64> = y.iter().map(|&v| -v.ln() / eps + TIE).collect();
    let levels: Vec<u64> = t.iter().map(|&v| if v >= 1.0 { v.floor() as u64 } else { 0 }).collect();
    let top = levels.iter().copied().max().unwrap_or(0);
    let mut direct = 0.0;
    for n in 1..=top {
        let mut row = 0.0;
        for (xi, &j) in x.iter().zip(&levels) {
            if j >= n {
                row += xi;
            }
        }
        direct += row;
    }
    let mut c = vec![0.0; top as usize + 1];
    for (xi, &j) in x.iter().zip(&levels) {
        c[j as usize] += xi;
    }
    let regrouped = c.iter().enumerate().map(|(j, cj)| j as f64 * cj).sum();
    TailSum { direct, regrouped }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baker_margins() {
        let b = PiecewiseMap::baker(2).unwrap();
        let r = check_hyperbolicity(&b, b.cone, &GridSpec::default());
        assert_eq!(r.margin("H1"), 0.75);
        assert_eq!(r.margin("H2"), 0.0);
        assert_eq!(r.margin("H3"), 0.75);
        assert_eq!(r.margin("H4"), 0.0);
        assert_eq!(r.samples, 2 * 32 * 32);
        let c = check_cone_properties(&b, b.cone, &GridSpec::default());
        assert_eq!(c.margin("cone_unstable"), 0.75);
        assert_eq!(c.margin("expansion_unstable"), 0.0);
    }

    #[test]
    fn tail_sum_geometric() {
        let x: Vec<f64> = (1..=60).map(|i| 0.5f64.powi(i)).collect();
        let s = tail_sum(&x, &x, 2f64.ln());
        assert!((s.direct - 2.0).abs() < 1e-12 && (s.regrouped - 2.0).abs() < 1e-12);
        let none = tail_sum(&[1.0, 2.0], &[0.999, 0.995], 0.01);
        assert_eq!(none.direct, 0.0);
    }

    #[test]
    fn g3_baker_is_log_two() {
        let b = PiecewiseMap::baker(2).unwrap();
        let g = check_g3(&b, 100);
        assert!((g.partial_sum - 2f64.ln()).abs() < 1e-12);
        assert!(!g.diverging);
    }
}
