//! Empirical SRB measures: Birkhoff averages of orbits and time-averaged
//! pushforwards of a Sinai measure on an unstable curve.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::geometry::{PiecewiseMap, Point2, Vector2};
use crate::measures::sinai::SinaiDensity;
use crate::orbit::{dithered_step, rng_for, DITHER};
use crate::symbolic::Itinerary;

/// Registered observables, in report order.
pub const OBSERVABLES: [&str; 5] = ["x", "y", "x2", "xy", "y2"];

fn observe(p: Point2) -> [f64; 5] {
    [p.x, p.y, p.x * p.x, p.x * p.y, p.y * p.y]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableStat {
    pub name: String,
    pub mean: f64,
    /// Standard error from the spread of independent group means.
    pub stderr: f64,
}

/// An orbit point kept for later integration, with the unit unstable
/// tangent transported along the orbit and log D^uF there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub point: Point2,
    pub tangent: Vector2,
    pub log_du: f64,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    /// Bins per side.
    pub m: usize,
    /// Histogram counts, row-major with rows indexed by y.
    pub counts: Vec<f64>,
    /// Total histogram count.
    pub total: f64,
    pub observables: Vec<ObservableStat>,
    /// Independent groups behind the error bars (seeds or point batches).
    pub groups: usize,
    /// Seeds or points discarded after leaving the enumerated branches.
    pub dropped: usize,
    /// Fraction of pushforward weight lost to tail truncation.
    pub leaked: f64,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

impl EmpiricalMeasure {
    pub fn masses(&self) -> Vec<f64> {
        self.counts.iter().map(|c| c / self.total).collect()
    }

    pub fn observable(&self, name: &str) -> Option<&ObservableStat> {
        self.observables.iter().find(|o| o.name == name)
    }

    /// Largest |bin mass − 1/m²|.
    pub fn sup_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / (self.m * self.m) as f64;
        self.counts.iter().map(|c| (c / self.total - u).abs()).fold(0.0, f64::max)
    }
}

fn bin(m: usize, p: Point2) -> usize {
    let c = ((p.x * m as f64) as usize).min(m - 1);
    let r = ((p.y * m as f64) as usize).min(m - 1);
    r * m + c
}

/// Per-group accumulator, merged in group order.
#[derive(Clone)]
struct Acc {
    counts: Vec<f64>,
    total: f64,
    sums: [f64; 5],
    n: f64,
    samples: Vec<Sample>,
}

impl Acc {
    fn new(m: usize) -> Self {
        Acc { counts: vec![0.0; m * m], total: 0.0, sums: [0.0; 5], n: 0.0, samples: Vec::new() }
    }
}

fn assemble(m: usize, accs: Vec<Acc>, dropped: usize, leaked: f64) -> EmpiricalMeasure {
    let mut counts = vec![0.0; m * m];
    let mut total = 0.0;
    let mut samples = Vec::new();
    let mut means: Vec<[f64; 5]> = Vec::new();
    let mut sums = [0.0; 5];
    let mut n = 0.0;
    for a in accs {
        counts.iter_mut().zip(&a.counts).for_each(|(c, v)| *c += v);
        total += a.total;
        if a.n > 0.0 {
            means.push(a.sums.map(|s| s / a.n));
        }
        sums.iter_mut().zip(a.sums).for_each(|(s, v)| *s += v);
        n += a.n;
        samples.extend(a.samples);
    }
    let g = means.len();
    let observables = OBSERVABLES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mean = sums[k] / n;
            let stderr = if g > 1 {
                let gm = means.iter().map(|v| v[k]).sum::<f64>() / g as f64;
                let var = means.iter().map(|v| (v[k] - gm).powi(2)).sum::<f64>() / (g - 1) as f64;
                (var / g as f64).sqrt()
            } else {
                f64::NAN
            };
            ObservableStat { name: (*name).to_string(), mean, stderr }
        })
        .collect();
    EmpiricalMeasure { m, counts, total, observables, groups: g, dropped, leaked, samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirkhoffOptions {
    /// Steps discarded before recording; ignored when n ≤ burn_in.
    pub burn_in: usize,
    /// Histogram every `thin`-th recorded point (observables use all).
    pub thin: usize,
    pub bins: usize,
    pub dither: f64,
    /// Keep every `retain`-th recorded point with its tangent (0 = none).
    pub retain: usize,
    pub seed: u64,
}

impl Default for BirkhoffOptions {
    fn default() -> Self {
        BirkhoffOptions { burn_in: 1000, thin: 1, bins: 64, dither: DITHER, retain: 0, seed: 0 }
    }
}

fn effective_burn(burn_in: usize, n: usize) -> usize {
    if n > burn_in {
        burn_in
    } else {
        0
    }
}

/// Transport a unit tangent one step; returns (new tangent, log|Df v|).
fn push_tangent(map: &PiecewiseMap, i: usize, z: Point2, v: Vector2) -> (Vector2, f64) {
    let w = map.jet(i, z).apply(v);
    let n = w.norm();
    (Vector2::new(w.v1 / n, w.v2 / n), n.ln())
}

/// Histogram and observable averages of the orbits of `seeds` over steps
/// burn_in ≤ k < n. Seeds whose orbit leaves the enumerated branches are
/// dropped.
pub fn birkhoff_srb(map: &PiecewiseMap, seeds: &[Point2], n: usize, opts: &BirkhoffOptions) -> Result<EmpiricalMeasure> {
    let m = opts.bins.max(1);
    let burn = effective_burn(opts.burn_in, n);
    let thin = opts.thin.max(1);
    let runs: Vec<Option<Acc>> = seeds
        .par_iter()
        .enumerate()
        .map(|(idx, &z0)| {
            let mut rng = rng_for(opts.seed, idx as u64);
            let mut acc = Acc::new(m);
            let mut z = z0.clamped();
            let mut v = Vector2::new(1.0, 0.0);
            for k in 0..n {
                let rec = k >= burn;
                if rec {
                    let j = k - burn;
                    if j.is_multiple_of(thin) {
                        acc.counts[bin(m, z)] += 1.0;
                        acc.total += 1.0;
                    }
                    let o = observe(z);
                    acc.sums.iter_mut().zip(o).for_each(|(s, v)| *s += v);
                    acc.n += 1.0;
                }
                if k + 1 == n && !(rec && opts.retain > 0) {
                    break;
                }
                let (hit, w) = dithered_step(map, z, &mut rng, opts.dither).ok()?;
                if opts.retain > 0 {
                    let (nv, ldu) = push_tangent(map, hit.index, z, v);
                    if rec && (k - burn).is_multiple_of(opts.retain) {
                        acc.samples.push(Sample { point: z, tangent: v, log_du: ldu, group: idx });
                    }
                    v = nv;
                }
                if k + 1 == n {
                    break;
                }
                z = w;
            }
            Some(acc)
        })
        .collect();
    let dropped = runs.iter().filter(|r| r.is_none()).count();
    if dropped == seeds.len() {
        return Err(Error::AllSeedsEscaped { seeds: seeds.len() });
    }
    Ok(assemble(m, runs.into_iter().flatten().collect(), dropped, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PushforwardOptions {
    /// Equal-weight points representing ν₀.
    pub points: usize,
    /// Truncation depth of the Sinai products.
    pub depth: usize,
    /// Time steps discarded before averaging; ignored when n ≤ burn_in.
    pub burn_in: usize,
    pub bins: usize,
    /// Point batches behind the error bars.
    pub groups: usize,
    pub dither: f64,
    pub seed: u64,
}

impl Default for PushforwardOptions {
    fn default() -> Self {
        PushforwardOptions { points: 4096, depth: 20, burn_in: 50, bins: 64, groups: 16, dither: DITHER, seed: 0 }
    }
}

/// Stratified points x_j = CDF⁻¹((j + u_j)/M) of the Sinai measure on its
/// curve, u_j uniform from stream j. Midpoint quantiles would be dyadic
/// rationals for flat densities, and those are eventually mapped onto post
/// boundaries by affine branches with even slopes.
pub fn inverse_cdf_points(density: &SinaiDensity, count: usize, seed: u64) -> Vec<Point2> {
    let cdf = density.cdf();
    let grid = &density.curve.grid;
    (0..count)
        .map(|j| {
            let u: f64 = rng_for(seed, j as u64).random();
            let q = (j as f64 + u) / count as f64;
            let k = cdf.partition_point(|&c| c < q).clamp(1, cdf.len() - 1);
            let t = (q - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
            let x = grid[k - 1] + t * (grid[k] - grid[k - 1]);
            Point2::new(x, density.curve.value(x)).clamped()
        })
        .collect()
}

/// ν_n = (1/n) Σ_k σ^k_* ν₀ for ν₀ the normalised Sinai measure on the
/// unstable manifold of `past`, sampled by equal-weight points.
pub fn pushforward_srb(map: &PiecewiseMap, past: &Itinerary, n: usize, opts: &PushforwardOptions) -> Result<EmpiricalMeasure> {
    let density = SinaiDensity::new(map, past, 0.5, opts.depth.min(past.len().saturating_sub(1)).max(1))?;
    let pts = inverse_cdf_points(&density, opts.points.max(1), opts.seed ^ 0x5eed);
    let m = opts.bins.max(1);
    let burn = effective_burn(opts.burn_in, n);
    let groups = opts.groups.clamp(1, pts.len());
    let runs: Vec<(usize, Option<Acc>)> = pts
        .par_iter()
        .enumerate()
        .map(|(j, &z0)| {
            let mut rng = rng_for(opts.seed, j as u64);
            let mut acc = Acc::new(m);
            let mut z = z0;
            for k in 0..n {
                if k >= burn {
                    acc.counts[bin(m, z)] += 1.0;
                    acc.total += 1.0;
                    acc.sums.iter_mut().zip(observe(z)).for_each(|(s, v)| *s += v);
                    acc.n += 1.0;
                }
                if k + 1 < n {
                    match dithered_step(map, z, &mut rng, opts.dither) {
                        Ok((_, w)) => z = w,
                        Err(_) => return (j, None),
                    }
                }
            }
            (j, Some(acc))
        })
        .collect();
    let lost = runs.iter().filter(|r| r.1.is_none()).count();
    let leaked = lost as f64 / pts.len() as f64;
    if leaked > 1e-3 {
        return Err(Error::MassLeak { lost: leaked });
    }
    let mut batches = vec![Acc::new(m); groups];
    for (j, acc) in runs {
        if let Some(a) = acc {
            let b = &mut batches[j % groups];
            b.counts.iter_mut().zip(&a.counts).for_each(|(c, v)| *c += v);
            b.total += a.total;
            b.sums.iter_mut().zip(a.sums).for_each(|(s, v)| *s += v);
            b.n += a.n;
        }
    }
    Ok(assemble(m, batches, lost, leaked))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells after merging.
    pub cells: usize,
    pub passed: bool,
}

/// χ² goodness of fit of the histogram against Lebesgue measure. Bins are
/// merged in index order until each cell expects at least `min_expected`
/// counts (a short final cell is folded into its predecessor).
pub fn chi_square_uniform(measure: &EmpiricalMeasure, min_expected: f64, significance: f64) -> ChiSquare {
    let bins = measure.counts.len();
    let e = measure.total / bins as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for &c in &measure.counts {
        obs += c;
        exp += e;
        if exp >= min_expected {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = match ChiSquared::new(dof as f64) {
        Ok(d) => 1.0 - d.cdf(statistic),
        Err(_) => f64::NAN,
    };
    ChiSquare { statistic, dof, p_value, cells: cells.len(), passed: p_value >= significance }
}

/// max_k |a_k − b_k| / sqrt(σa_k² + σb_k²) over the registered observables.
pub fn observable_z_scores(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Vec<f64> {
    a.observables
        .iter()
        .zip(&b.observables)
        .map(|(p, q)| (p.mean - q.mean).abs() / (p.stderr.powi(2) + q.stderr.powi(2)).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::uniform_points;

    #[test]
    fn one_step_histogram_is_the_seed_distribution() {
        let b = PiecewiseMap::baker(2).unwrap();
        let seeds = uniform_points(3, 0, 50);
        let h = birkhoff_srb(&b, &seeds, 1, &BirkhoffOptions { bins: 4, ..Default::default() }).unwrap();
        let mut want = vec![0.0; 16];
        for s in &seeds {
            want[bin(4, *s)] += 1.0;
        }
        assert_eq!(h.counts, want);
        assert_eq!(h.total, 50.0);
        let mean_x = seeds.iter().map(|p| p.x).sum::<f64>() / 50.0;
        assert!((h.observable("x").unwrap().mean - mean_x).abs() < 1e-15);
    }

    #[test]
    fn chi_square_merges_small_bins() {
        let m = EmpiricalMeasure {
            m: 2,
            counts: vec![10.0, 12.0, 9.0, 9.0],
            total: 40.0,
            observables: vec![],
            groups: 1,
            dropped: 0,
            leaked: 0.0,
            samples: vec![],
        };
        let c = chi_square_uniform(&m, 20.0, 0.001);
        assert_eq!(c.cells, 2);
        assert!((c.statistic - (2.0 * 4.0 / 20.0)).abs() < 1e-12);
        assert!(c.passed);
    }

    #[test]
    fn pushforward_one_step_is_the_curve_measure() {
        let b = PiecewiseMap::baker(2).unwrap();
        let past = Itinerary::backward(vec![1, 2, 1, 1, 2, 2, 1, 2, 1, 1, 1, 2, 2, 1, 2, 1, 2, 2, 1, 1, 2, 1, 2, 1, 1]).unwrap();
        let opts = PushforwardOptions { points: 64, bins: 8, groups: 4, ..Default::default() };
        let h = pushforward_srb(&b, &past, 1, &opts).unwrap();
        // Flat density on a horizontal line, stratified: eight x-bins of
        // equal mass in one row.
        let nonzero: Vec<f64> = h.counts.iter().copied().filter(|&c| c > 0.0).collect();
        assert_eq!(nonzero, vec![8.0; 8]);
    }
}
