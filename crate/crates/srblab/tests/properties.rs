use proptest::prelude::*;
use srblab::conditions::tail_sum;
use srblab::config::{FamilyName, RunConfig};
use srblab::symbolic::{forward_itinerary, post_cylinder};
use srblab::{PiecewiseMap, Point2, Vector2};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn branch_inverse_undoes_the_branch(eps in -0.07f64..0.07, x in 0.002f64..1.0, y in 0.0f64..=1.0) {
        let map = PiecewiseMap::perturbed_lueroth(eps).unwrap();
        let z = Point2::new(x, y);
        let i = map.branch_of(z).unwrap().index;
        let back = map.inverse(i, map.eval(i, z)).unwrap();
        prop_assert!(back.dist(&z) < 1e-11, "{z:?} -> {back:?}");
    }

    #[test]
    fn unstable_cone_is_invariant_and_expanded(
        eps in -0.07f64..0.07,
        x in 0.01f64..1.0,
        y in 0.0f64..=1.0,
        s in -1.0f64..=1.0,
    ) {
        let map = PiecewiseMap::perturbed_lueroth(eps).unwrap();
        let cone = map.cone;
        let z = Point2::new(x, y);
        let v = Vector2::new(1.0, s * cone.alpha);
        let w = map.jet_at(z).unwrap().apply(v);
        prop_assert!(cone.in_unstable(w, 1e-12));
        prop_assert!(w.norm() >= cone.k0 * v.norm() * (1.0 - 1e-12));
    }

    #[test]
    fn itinerary_prefix_cylinders_contain_the_point(x in 0.01f64..1.0, y in 0.0f64..=1.0, depth in 1usize..6) {
        let map = PiecewiseMap::lueroth();
        let z = Point2::new(x, y);
        let it = forward_itinerary(&map, z, depth, true).unwrap();
        prop_assume!(it.symbols().len() == depth);
        let c = post_cylinder(&map, it.symbols()).unwrap();
        // Lüroth cylinders are vertical, so every section is the same interval.
        let (_, lo, hi) = c.sections[0];
        prop_assert!(lo - 1e-12 <= x && x <= hi + 1e-12, "{x} not in [{lo}, {hi}]");
    }

    #[test]
    fn tail_sum_orders_agree(pairs in prop::collection::vec((0.0f64..1.0, 1e-6f64..1.0), 1..60), eps in 0.05f64..2.0) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let t = tail_sum(&x, &y, eps);
        prop_assert!((t.direct - t.regrouped).abs() <= 1e-9 * (1.0 + t.direct.abs()));
    }

    #[test]
    fn resolved_configs_round_trip(seed in any::<u64>(), family in 0usize..3, eps in -0.05f64..0.05) {
        let name = [FamilyName::Baker, FamilyName::Lueroth, FamilyName::PerturbedLueroth][family];
        let mut c = RunConfig::for_family(name);
        c.seed = seed;
        if name == FamilyName::PerturbedLueroth {
            c.parameters.epsilon = Some(eps);
        }
        let r = c.resolved().unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&r).unwrap()).unwrap().resolved().unwrap();
        prop_assert_eq!(r, again);
    }
}
