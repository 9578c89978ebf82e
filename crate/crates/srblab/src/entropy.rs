//! Entropy of the SRB measure, estimated four ways:
//!
//! * derivative growth: (1/n) log ‖DF^n(z)‖ from a renormalised frame,
//! * directional: (1/n) log |DF^n(z) v| for a cone vector v,
//! * cylinder: −(1/d) log of the visit frequency of z's own depth-d cylinder,
//! * integral: ∫ log D^uF dμ over retained SRB samples (disjoint strips only).
//!
//! Norms are max norms throughout, so ‖A‖ is the max row sum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PiecewiseMap, Point2, Vector2};
use crate::measures::EmpiricalMeasure;
use crate::orbit::{dithered_step, rng_for, DITHER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    DerivativeGrowth,
    Directional,
    Cylinder,
    Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub route: Route,
    /// Nats per step.
    pub value: f64,
    /// Standard error over seeds (or sample groups); 0 for a single orbit.
    pub spread: f64,
    /// Orbit length or sample count.
    pub n: usize,
    pub seeds: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitOptions {
    pub seed: u64,
    pub dither: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { seed: 0, dither: DITHER }
    }
}

/// DF^n kept as exp(log_scale)·frame with ‖frame‖ = 1.
#[derive(Debug, Clone, Copy)]
struct Frame {
    a: [[f64; 2]; 2],
    log_scale: f64,
}

impl Frame {
    fn identity() -> Self {
        Frame { a: [[1.0, 0.0], [0.0, 1.0]], log_scale: 0.0 }
    }

    fn push(&mut self, d: [[f64; 2]; 2]) {
        let a = self.a;
        let mut b = [[0.0; 2]; 2];
        for (i, row) in b.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = d[i][0] * a[0][j] + d[i][1] * a[1][j];
            }
        }
        let norm = (b[0][0].abs() + b[0][1].abs()).max(b[1][0].abs() + b[1][1].abs());
        for row in &mut b {
            for v in row {
                *v /= norm;
            }
        }
        self.a = b;
        self.log_scale += norm.ln();
    }

    /// log ‖DF^n‖.
    fn log_norm(&self) -> f64 {
        self.log_scale
    }

    /// log |F^n_{1x}|.
    fn log_f1x(&self) -> f64 {
        self.log_scale + self.a[0][0].abs().ln()
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn frame_growth(map: &PiecewiseMap, z0: Point2, n: usize, stream: u64, opts: &OrbitOptions) -> Option<f64> {
    let mut rng = rng_for(opts.seed, stream);
    let mut z = z0.clamped();
    let mut f = Frame::identity();
    for _ in 0..n {
        let (hit, w) = dithered_step(map, z, &mut rng, opts.dither).ok()?;
        f.push(map.jet(hit.index, z).d1);
        z = w;
    }
    Some(f.log_norm() / n as f64)
}

/// Mean over seeds of (1/n) log ‖DF^n(z)‖; seeds leaving the enumerated
/// branches are dropped.
pub fn entropy_derivative_growth(map: &PiecewiseMap, seeds: &[Point2], n: usize, opts: &OrbitOptions) -> Result<EntropyEstimate> {
    if n == 0 {
        return Err(Error::ConfigInvalid("orbit length must be positive".into()));
    }
    let vals: Vec<Option<f64>> =
        seeds.par_iter().enumerate().map(|(k, &z)| frame_growth(map, z, n, k as u64, opts)).collect();
    let kept: Vec<f64> = vals.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::AllSeedsEscaped { seeds: seeds.len() });
    }
    let (value, spread) = mean_and_stderr(&kept);
    Ok(EntropyEstimate {
        route: Route::DerivativeGrowth,
        value,
        spread,
        n,
        seeds: kept.len(),
        dropped: seeds.len() - kept.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalEstimate {
    pub estimate: EntropyEstimate,
    /// (1/n) log ‖DF^n‖ on the same orbit.
    pub operator: f64,
    /// (1/n) log |F^n_{1x}| on the same orbit.
    pub horizontal: f64,
    /// Whether (1 − α²)|F^k_{1x}| ≤ |DF^k v| ≤ (1 + α²)|F^k_{1x}| held at
    /// every step k.
    pub bound_held: bool,
    /// Largest excursion of log|DF^k v| − log|F^k_{1x}| outside
    /// [log(1 − α²), log(1 + α²)] (0 when the bound held).
    pub worst_excess: f64,
}

/// Slack for comparing logs of products accumulated over many steps.
const LOG_SLACK: f64 = 1e-9;

/// (1/n) log |DF^n(z) v| for v in the unstable cone, with the transported
/// vector renormalised each step.
pub fn entropy_directional(map: &PiecewiseMap, z: Point2, v: Vector2, n: usize, opts: &OrbitOptions) -> Result<DirectionalEstimate> {
    if n == 0 {
        return Err(Error::ConfigInvalid("orbit length must be positive".into()));
    }
    let alpha = map.cone.alpha;
    if !map.cone.in_unstable(v, 1e-12) {
        return Err(Error::ConeEscape { step: 0 });
    }
    let (lo, hi) = ((1.0 - alpha * alpha).ln(), (1.0 + alpha * alpha).ln());
    let mut rng = rng_for(opts.seed, 0);
    let mut p = z.clamped();
    let mut u = v.normalized();
    let mut log_v = 0.0;
    let mut f = Frame::identity();
    let mut worst: f64 = 0.0;
    for step in 1..=n {
        let (hit, w) = dithered_step(map, p, &mut rng, opts.dither)?;
        let d = map.jet(hit.index, p).d1;
        let t = Vector2::new(d[0][0] * u.v1 + d[0][1] * u.v2, d[1][0] * u.v1 + d[1][1] * u.v2);
        let tn = t.norm();
        log_v += tn.ln();
        u = Vector2::new(t.v1 / tn, t.v2 / tn);
        if !map.cone.in_unstable(u, 1e-12) {
            return Err(Error::ConeEscape { step });
        }
        f.push(d);
        let gap = log_v - f.log_f1x();
        worst = worst.max(lo - gap).max(gap - hi);
        p = w;
    }
    let nf = n as f64;
    let excess = worst.max(0.0);
    Ok(DirectionalEstimate {
        estimate: EntropyEstimate { route: Route::Directional, value: log_v / nf, spread: 0.0, n, seeds: 1, dropped: 0 },
        operator: f.log_norm() / nf,
        horizontal: f.log_f1x() / nf,
        bound_held: excess <= LOG_SLACK,
        worst_excess: excess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderDepth {
    pub depth: usize,
    pub value: f64,
    pub spread: f64,
    /// Smallest visit count over the seeds.
    pub min_visits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderEstimate {
    pub estimate: EntropyEstimate,
    pub per_depth: Vec<CylinderDepth>,
}

/// Minimum number of visits for a cylinder frequency to be used.
pub const MIN_VISITS: usize = 30;

fn orbit_symbols(map: &PiecewiseMap, z0: Point2, n: usize, stream: u64, opts: &OrbitOptions) -> Option<Vec<usize>> {
    let mut rng = rng_for(opts.seed, stream);
    let mut z = z0.clamped();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (hit, w) = dithered_step(map, z, &mut rng, opts.dither).ok()?;
        out.push(hit.index);
        z = w;
    }
    Some(out)
}

/// Visit counts of the orbit's own cylinders of depths 1..=dmax.
fn own_cylinder_visits(symbols: &[usize], dmax: usize) -> Vec<usize> {
    let own = &symbols[..dmax];
    let mut visits = vec![0usize; dmax + 1];
    for k in 0..=symbols.len() - dmax {
        let lcp = symbols[k..k + dmax].iter().zip(own).take_while(|(a, b)| a == b).count();
        for v in visits.iter_mut().take(lcp + 1).skip(1) {
            *v += 1;
        }
    }
    visits
}

/// −(1/d) log μ̂(V_{a₀…a_{d−1}}(z)) with μ̂ the visit frequency along the
/// orbit of z, averaged over seeds, for d in `depths`.
pub fn entropy_cylinder(
    map: &PiecewiseMap,
    seeds: &[Point2],
    depths: std::ops::RangeInclusive<usize>,
    n: usize,
    opts: &OrbitOptions,
) -> Result<CylinderEstimate> {
    let dmax = *depths.end();
    if *depths.start() == 0 || dmax >= n {
        return Err(Error::ConfigInvalid("cylinder depths must satisfy 1 ≤ d < n".into()));
    }
    let runs: Vec<Option<Vec<usize>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &z)| orbit_symbols(map, z, n, k as u64, opts).map(|s| own_cylinder_visits(&s, dmax)))
        .collect();
    let kept: Vec<&Vec<usize>> = runs.iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::AllSeedsEscaped { seeds: seeds.len() });
    }
    let windows = (n - dmax + 1) as f64;
    let mut per_depth = Vec::new();
    for d in depths {
        let min_visits = kept.iter().map(|v| v[d]).min().unwrap_or(0);
        if min_visits < MIN_VISITS {
            return Err(Error::UnderSampled { depth: d, visits: min_visits });
        }
        let vals: Vec<f64> = kept.iter().map(|v| -(v[d] as f64 / windows).ln() / d as f64).collect();
        let (value, spread) = mean_and_stderr(&vals);
        per_depth.push(CylinderDepth { depth: d, value, spread, min_visits });
    }
    let last = per_depth.last().unwrap();
    Ok(CylinderEstimate {
        estimate: EntropyEstimate {
            route: Route::Cylinder,
            value: last.value,
            spread: last.spread,
            n,
            seeds: kept.len(),
            dropped: seeds.len() - kept.len(),
        },
        per_depth,
    })
}

/// Σ −p log p over the depth-1 visit frequencies of the seeds' orbits: the
/// entropy of the partition into posts.
pub fn partition_entropy(map: &PiecewiseMap, seeds: &[Point2], n: usize, opts: &OrbitOptions) -> Result<f64> {
    let runs: Vec<Option<Vec<usize>>> =
        seeds.par_iter().enumerate().map(|(k, &z)| orbit_symbols(map, z, n, k as u64, opts)).collect();
    let mut counts = std::collections::BTreeMap::<usize, f64>::new();
    let mut total = 0.0;
    for s in runs.iter().flatten() {
        for &a in s {
            *counts.entry(a).or_default() += 1.0;
            total += 1.0;
        }
    }
    if total == 0.0 {
        return Err(Error::AllSeedsEscaped { seeds: seeds.len() });
    }
    Ok(counts.values().map(|c| -(c / total) * (c / total).ln()).sum())
}

/// ∫ log D^uF dμ as the mean of log D^uF over the retained samples of an
/// empirical SRB measure. Valid only when the strips have disjoint
/// interiors.
pub fn entropy_integral(map: &PiecewiseMap, srb: &EmpiricalMeasure) -> Result<EntropyEstimate> {
    if !map.family().disjoint_strips() {
        return Err(Error::StripsOverlap);
    }
    if srb.samples.is_empty() {
        return Err(Error::ConfigInvalid("the empirical measure retains no samples".into()));
    }
    let mut groups = std::collections::BTreeMap::<usize, (f64, f64)>::new();
    let mut sum = 0.0;
    for s in &srb.samples {
        let g = groups.entry(s.group).or_default();
        g.0 += s.log_du;
        g.1 += 1.0;
        sum += s.log_du;
    }
    let means: Vec<f64> = groups.values().map(|(s, c)| s / c).collect();
    let (_, spread) = mean_and_stderr(&means);
    Ok(EntropyEstimate {
        route: Route::Integral,
        value: sum / srb.samples.len() as f64,
        spread,
        n: srb.samples.len(),
        seeds: groups.len(),
        dropped: srb.dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::uniform_points;

    #[test]
    fn baker_routes_are_exact() {
        let b = PiecewiseMap::baker(2).unwrap();
        let seeds = uniform_points(1, 0, 8);
        let e = entropy_derivative_growth(&b, &seeds, 2000, &OrbitOptions::default()).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-12);
        let d = entropy_directional(&b, Point2::new(0.3, 0.4), Vector2::new(1.0, 0.0), 500, &OrbitOptions::default()).unwrap();
        assert!((d.estimate.value - 2f64.ln()).abs() < 1e-12);
        assert!(d.bound_held);
        let p = b.power(2, 100).unwrap();
        let e2 = entropy_derivative_growth(&p, &seeds, 1000, &OrbitOptions::default()).unwrap();
        assert!((e2.value - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn own_cylinder_counts() {
        let s = [1, 2, 1, 2, 1, 1, 2];
        let v = own_cylinder_visits(&s, 2);
        // windows 0..=5: [1,2] occurs at 0, 2, 5; [1] at 0, 2, 4, 5.
        assert_eq!(v[1], 4);
        assert_eq!(v[2], 3);
    }

    #[test]
    fn cone_escape_and_overlap() {
        let b = PiecewiseMap::baker(2).unwrap();
        assert!(matches!(
            entropy_directional(&b, Point2::new(0.3, 0.3), Vector2::new(0.1, 1.0), 10, &OrbitOptions::default()),
            Err(Error::ConeEscape { step: 0 })
        ));
    }
}
