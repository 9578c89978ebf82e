use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srblab::conditions::{check_distortion_d1, GridSpec};
use srblab::distortion::{
    calibrate_c, composition_distortion, fluctuation_check, theta, BoxRegion, DistortionOptions,
};
use srblab::geometry::section::post_cylinder_row;
use srblab::graph_transform::{unstable_manifold, ManifoldOptions};
use srblab::symbolic::Itinerary;
use srblab::{PiecewiseMap, Point2};

fn word(seed: u64, len: usize, top: usize) -> Vec<usize> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| r.random_range(1..=top)).collect()
}

#[test]
fn perturbed_ratio_plateaus() {
    let map = PiecewiseMap::perturbed_lueroth(0.005).unwrap();
    let past = Itinerary::backward(word(1, 40, 4)).unwrap();
    let (g, _) = unstable_manifold(&map, &past, &ManifoldOptions::default()).unwrap();
    let w = word(2, 16, 2);
    let mut at = std::collections::BTreeMap::new();
    for n in (2..=16).step_by(2) {
        let r = composition_distortion(&map, &g, &w[..n], &DistortionOptions::default()).unwrap();
        assert!(r.ratio_max * r.ratio_min >= 1.0 - 1e-9);
        assert!(r.ratio_max <= r.bound_rhs);
        at.insert(n, r.ratio_max);
    }
    // Uniform in n: no depth exceeds the depth-8 value by more than 5%.
    assert!(at.values().all(|&r| r <= 1.05 * at[&8]), "{at:?}");
    assert!(at[&16] / at[&8] < 1.05, "{at:?}");
}

#[test]
fn theta_agrees_with_d1_sampler() {
    let map = PiecewiseMap::perturbed_lueroth(0.02).unwrap();
    let d1 = check_distortion_d1(&map, &GridSpec::new(17, 17, 2, 2));
    let sup = d1.statistics["D1_sup"];
    let (l, r) = map.post_bounds(2, 0.5);
    let region = BoxRegion { x: (0.0, 1.0), y: (0.0, 1.0), samples: 17 };
    let th = theta(&map, &[2], Point2::new(0.5 * (l + r), 0.5), &region).unwrap();
    assert!(th > 0.0);
    assert!((th - sup).abs() <= 0.1 * sup, "theta {th} vs D1 {sup}");
}

#[test]
fn theta_stays_bounded_on_shrinking_cylinders() {
    let map = PiecewiseMap::perturbed_lueroth(0.02).unwrap();
    let w = word(9, 16, 3);
    let y = 0.4;
    let mut thetas = Vec::new();
    for n in 1..=16 {
        let (l, r) = post_cylinder_row(&map, &w[..n], y).unwrap();
        let z = Point2::new(0.5 * (l + r), y);
        let region = BoxRegion { x: (l, r), y: (y - 0.05, y + 0.05), samples: 7 };
        thetas.push(theta(&map, &w[..n], z, &region).unwrap());
    }
    let early = thetas[..4].iter().copied().fold(0.0, f64::max);
    assert!(thetas.iter().all(|&t| t <= 2.0 * early), "{thetas:?}");
}

#[test]
fn calibrated_constant_holds_on_held_out_pairs() {
    let map = PiecewiseMap::perturbed_lueroth(0.02).unwrap();
    let (g, _) = unstable_manifold(&map, &Itinerary::backward(word(4, 40, 4)).unwrap(), &ManifoldOptions::default()).unwrap();
    let i = 2;
    let (l, r) = map.post_bounds(i, 0.5);
    let delta = 0.5 * (r - l);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = |count: usize| -> Vec<(f64, f64)> {
        (0..count)
            .map(|_| {
                let z = rng.random_range(l + 0.55 * delta..r - 0.55 * delta);
                let off: f64 = rng.random_range(-0.1..0.1);
                (z, z + off * delta)
            })
            .collect()
    };
    let train = pairs(200);
    let test = pairs(1000);
    let c = calibrate_c(&map, i, &g, &train, delta, 2.0).unwrap();
    for (z, w) in test {
        let f = fluctuation_check(&map, i, &g, z, w, delta, c).unwrap();
        assert!(f.actual <= f.bound, "{f:?}");
    }
}
