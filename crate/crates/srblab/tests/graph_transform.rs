use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srblab::graph_transform::{
    gamma, manifold_continuity, r1, stable_manifold, unstable_manifold, BranchChart, CurveGraph, ManifoldOptions,
    TransportStats,
};
use srblab::symbolic::{point_from_itinerary, Itinerary};
use srblab::{PiecewiseMap, Point2};

fn random_word(seed: u64, len: usize) -> Vec<usize> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| r.random_range(1..=5)).collect()
}

#[test]
fn perturbed_manifold_is_invariant_and_in_cone() {
    let map = PiecewiseMap::perturbed_lueroth(0.005).unwrap();
    let word = random_word(11, 30);
    let past = Itinerary::backward(word.clone()).unwrap();
    let (g, d) = unstable_manifold(&map, &past, &ManifoldOptions::default()).unwrap();
    assert!(d.converged);
    assert!(g.sup_slope() <= map.cone.alpha);
    assert!(g.sup_curvature() <= d.k2, "{} > {}", g.sup_curvature(), d.k2);

    let a = 3;
    let mut shifted = word.clone();
    shifted.push(a);
    let (g2, _) = unstable_manifold(&map, &Itinerary::backward(shifted).unwrap(), &ManifoldOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        let p = Point2::new(x, g.value(x));
        let (l, r) = map.post_bounds(a, p.y);
        if x < l || x > r {
            continue;
        }
        let q = map.eval(a, p);
        if (0.0..=1.0).contains(&q.x) {
            worst = worst.max((g2.value(q.x) - q.y).abs());
        }
    }
    assert!(worst < 1e-6, "invariance defect {worst:e}");
}

#[test]
fn transported_derivatives_match_finite_differences() {
    let map = PiecewiseMap::perturbed_lueroth(0.005).unwrap();
    let past = Itinerary::backward(random_word(5, 40)).unwrap();
    let (g, _) = unstable_manifold(&map, &past, &ManifoldOptions::default()).unwrap();
    let h = 1e-4;
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for k in 2..=98 {
        let x = k as f64 / 100.0;
        let fd1 = (g.value(x + h) - g.value(x - h)) / (2.0 * h);
        let hh = 1e-3;
        let fd2 = (g.value(x + hh) - 2.0 * g.value(x) + g.value(x - hh)) / (hh * hh);
        e1 = e1.max((fd1 - g.slope(x)).abs());
        e2 = e2.max((fd2 - g.curvature(x)).abs());
    }
    assert!(e1 < 1e-6, "slope mismatch {e1:e}");
    assert!(e2 < 1e-4, "curvature mismatch {e2:e}");
}

#[test]
fn slope_fixed_point_of_r1_on_periodic_curve() {
    let map = PiecewiseMap::perturbed_lueroth(0.005).unwrap();
    let (g, _) = unstable_manifold(&map, &Itinerary::backward(vec![2; 40]).unwrap(), &ManifoldOptions::default()).unwrap();
    let f = BranchChart { map: &map, index: 2 };
    let mut h = CurveGraph::constant(0.0, g.grid.len());
    for _ in 0..40 {
        let vals: Vec<f64> = g.grid.iter().map(|&x| r1(&f, &g, |u| h.value(u), x).unwrap()).collect();
        h = CurveGraph { grid: g.grid.clone(), g: vals, dg: vec![0.0; g.grid.len()], d2g: vec![0.0; g.grid.len()] };
        // Slopes of the interpolant for the next pass.
        let n = h.grid.len();
        for k in 0..n {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            h.dg[k] = (h.g[b] - h.g[a]) / (h.grid[b] - h.grid[a]);
        }
    }
    let fd = 1e-5;
    let worst = (5..=95)
        .map(|k| {
            let x = k as f64 / 100.0;
            (h.value(x) - (g.value(x + fd) - g.value(x - fd)) / (2.0 * fd)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn gamma_matches_pointwise_forward_map() {
    let map = PiecewiseMap::perturbed_lueroth(0.02).unwrap();
    let g = CurveGraph::from_fn(0.0, 1.0, 257, |x| (0.4 + 0.05 * x * x, 0.1 * x, 0.1));
    let mut st = TransportStats::default();
    let out = gamma(&BranchChart { map: &map, index: 2 }, &g, &g.grid, &mut st).unwrap();
    let (l, r) = (map.post_bounds(2, 0.0).0.min(map.post_bounds(2, 1.0).0), 1.0);
    let mut worst = 0.0f64;
    for k in 0..=1000 {
        let x = l + (r - l) * k as f64 / 1000.0;
        let q = map.eval(2, Point2::new(x, g.value(x)));
        if (0.0..=1.0).contains(&q.x) {
            worst = worst.max((out.value(q.x) - q.y).abs());
        }
    }
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn continuity_improves_with_agreement_depth() {
    let map = PiecewiseMap::perturbed_lueroth(0.005).unwrap();
    let opts = ManifoldOptions::default();
    let tail = random_word(3, 40);
    let mut prev = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for n in [5, 10, 15] {
        let mut a = tail.clone();
        let mut b = tail.clone();
        let k = a.len() - n - 1;
        a[k] = 1;
        b[k] = 4;
        let d = manifold_continuity(&map, &Itinerary::backward(a).unwrap(), &Itinerary::backward(b).unwrap(), &opts).unwrap();
        assert!(d.0 < prev.0 && d.1 < prev.1 && d.2 < prev.2, "{d:?} vs {prev:?}");
        prev = d;
    }
    let b = PiecewiseMap::baker(2).unwrap();
    let mut a = vec![1; 30];
    a[10] = 2;
    let d = manifold_continuity(&b, &Itinerary::backward(a).unwrap(), &Itinerary::backward(vec![1; 30]).unwrap(), &opts).unwrap();
    assert!(d.0 <= 2f64.powi(-19));
}

#[test]
fn stable_and_unstable_curves_meet_at_coded_point() {
    let map = PiecewiseMap::perturbed_lueroth(0.005).unwrap();
    let past = Itinerary::backward(random_word(21, 40)).unwrap();
    let future = Itinerary::forward(random_word(22, 40)).unwrap();
    let opts = ManifoldOptions::default();
    let (gu, _) = unstable_manifold(&map, &past, &opts).unwrap();
    let (gs, _) = stable_manifold(&map, &future, &opts).unwrap();
    // Intersection: x = gs(y), y = gu(x).
    let mut p = Point2::new(0.5, 0.5);
    for _ in 0..50 {
        p.x = gs.value(p.y);
        p.y = gu.value(p.x);
    }
    let c = point_from_itinerary(&map, &past, &future, 12).unwrap();
    assert!(p.dist(&c.point) <= c.residual + 1e-9, "{p:?} vs {:?} ({})", c.point, c.residual);
    let (bs, _) = stable_manifold(&PiecewiseMap::baker(2).unwrap(), &Itinerary::forward(vec![1; 60]).unwrap(), &opts).unwrap();
    assert!(bs.g.iter().all(|&v| v.abs() < 1e-15));
}
