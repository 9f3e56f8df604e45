use gw_bounds::bounds::{flb, ftlb, gw_bruteforce, sftlb, slb, stlb, tlb, QuadratureSpec};
use gw_bounds::ot::{exact_ot, wasserstein_1d, CostMatrix};
use gw_bounds::sliced::{sample_directions, sw2_squared};
use gw_bounds::spaces::{format_space, mm_from_point_cloud, parse_space, SpaceFormat};
use gw_bounds::{BoundConfig, MmSpace, PointCloud, StructuredSpace};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn cloud(n: std::ops::RangeInclusive<usize>, dim: usize) -> impl Strategy<Value = Array2<f64>> {
    n.prop_flat_map(move |n| {
        prop::collection::vec(-3.0f64..3.0, n * dim).prop_map(move |v| Array2::from_shape_vec((n, dim), v).unwrap())
    })
}

fn mm(points: &Array2<f64>) -> MmSpace {
    mm_from_point_cloud(&PointCloud::uniform(points.clone()).unwrap()).unwrap()
}

fn structured(points: &Array2<f64>, features: &[f64]) -> StructuredSpace {
    let n = points.nrows();
    let f = Array2::from_shape_fn((n, 1), |(i, _)| features[i % features.len()]);
    StructuredSpace::new(mm(points), f).unwrap()
}

fn measure(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(0.05f64..1.0, n),
        )
    })
    .prop_map(|(v, w)| {
        let s: f64 = w.iter().sum();
        (v, w.into_iter().map(|x| x / s).collect())
    })
}

fn sliced_cfg(seed: u64) -> BoundConfig {
    BoundConfig {
        rule: QuadratureSpec::Midpoint { r: 6 },
        num_projections: 20,
        seed,
        ..BoundConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_plan_has_the_right_marginals((a, wa) in measure(1..=7), (b, wb) in measure(1..=7)) {
        let cost = CostMatrix::new(Array2::from_shape_fn((a.len(), b.len()), |(i, j)| (a[i] - b[j]).abs())).unwrap();
        let plan = exact_ot(&cost, &wa, &wb).unwrap();
        prop_assert!(plan.marginal_violation(&wa, &wb) < 1e-12);
        prop_assert!(plan.matrix.iter().all(|&x| x >= 0.0));
        let product: f64 = (0..a.len())
            .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
            .map(|(i, j)| wa[i] * wb[j] * cost.entries()[[i, j]])
            .sum();
        prop_assert!(plan.cost <= product + 1e-12);
    }

    #[test]
    fn one_d_is_symmetric_and_translation_invariant((a, wa) in measure(1..=8), (b, wb) in measure(1..=8), shift in -4.0f64..4.0, p in 1.0f64..3.0) {
        let ab = wasserstein_1d(&a, &wa, &b, &wb, p).unwrap();
        let ba = wasserstein_1d(&b, &wb, &a, &wa, p).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let shifted = wasserstein_1d(&sa, &wa, &sb, &wb, p).unwrap();
        prop_assert!((ab - shifted).abs() <= 1e-9 * (1.0 + ab));
        prop_assert_eq!(wasserstein_1d(&a, &wa, &a, &wa, p).unwrap(), 0.0);
    }

    #[test]
    fn sliced_distance_is_a_metric(x in cloud(1..=6, 3), y in cloud(1..=6, 3), z in cloud(1..=6, 3), seed in any::<u64>()) {
        let proj = sample_directions(seed, 16, 3).unwrap();
        let w = |m: &Array2<f64>| vec![1.0 / m.nrows() as f64; m.nrows()];
        let d = |a: &Array2<f64>, b: &Array2<f64>| sw2_squared(a.view(), &w(a), b.view(), &w(b), &proj).unwrap().sqrt();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
    }

    #[test]
    fn hierarchy_below_gw(x in cloud(2..=5, 2), y in cloud(2..=5, 2), p in prop::sample::select(vec![1.0, 2.0])) {
        let (x, y) = (mm(&x), mm(&y));
        let cfg = BoundConfig { p, ..BoundConfig::default() };
        let f = flb(&x, &y, p).unwrap().value;
        let s = slb(&x, &y, p).unwrap().value;
        let t = tlb(&x, &y, &cfg).unwrap().value;
        prop_assert!(f <= t + 1e-9);
        prop_assert!(s <= t + 1e-9);
        if x.len() == y.len() {
            let g = gw_bruteforce(&x, &y, p).unwrap().value;
            prop_assert!(t <= g + 1e-9);
        }
    }

    #[test]
    fn bounds_scale_with_distances(x in cloud(2..=6, 2), y in cloud(2..=6, 2), c in 0.1f64..10.0) {
        let (x, y) = (mm(&x), mm(&y));
        let (xs, ys) = (x.scaled(c), y.scaled(c));
        let cfg = sliced_cfg(3);
        let tol = |v: f64| 1e-9 * (1.0 + v);
        for p in [1.0, 2.0] {
            let pc = BoundConfig { p, ..cfg.clone() };
            let t = tlb(&x, &y, &pc).unwrap().value;
            prop_assert!((tlb(&xs, &ys, &pc).unwrap().value - c * t).abs() <= tol(c * t));
            let f = flb(&x, &y, p).unwrap().value;
            prop_assert!((flb(&xs, &ys, p).unwrap().value - c * f).abs() <= tol(c * f));
        }
        let s = stlb(&x, &y, &cfg).unwrap().value;
        prop_assert!((stlb(&xs, &ys, &cfg).unwrap().value - c * s).abs() <= tol(c * s));
    }

    #[test]
    fn relabelling_changes_nothing(x in cloud(3..=7, 2), y in cloud(3..=7, 2), feats in prop::collection::vec(-2.0f64..2.0, 7), shift in 0usize..7) {
        let a = structured(&x, &feats);
        let b = structured(&y, &feats);
        let n = a.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let a2 = a.permuted(&perm);
        let cfg = sliced_cfg(11);
        prop_assert_eq!(ftlb(&a, &a2, &cfg).unwrap().value, 0.0);
        prop_assert_eq!(sftlb(&a, &a2, &cfg).unwrap().value, 0.0);
        let d1 = ftlb(&a, &b, &cfg).unwrap().value;
        let d2 = ftlb(&a2, &b, &cfg).unwrap().value;
        prop_assert!((d1 - d2).abs() <= 1e-12 * (1.0 + d1));
        prop_assert_eq!(sftlb(&a, &b, &cfg).unwrap().value, sftlb(&a2, &b, &cfg).unwrap().value);
    }

    #[test]
    fn sliced_values_depend_only_on_the_seed(x in cloud(2..=6, 2), y in cloud(2..=6, 2), seed in any::<u64>()) {
        let (x, y) = (mm(&x), mm(&y));
        let cfg = sliced_cfg(seed);
        let a = stlb(&x, &y, &cfg).unwrap();
        let b = stlb(&x, &y, &cfg).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.meta.seed, Some(seed));
    }

    #[test]
    fn spaces_round_trip(x in cloud(1..=6, 2), raw_w in prop::collection::vec(0.1f64..1.0, 6), feats in prop::collection::vec(-2.0f64..2.0, 6)) {
        let n = x.nrows();
        let s: f64 = raw_w[..n].iter().sum();
        let w = Array1::from_iter(raw_w[..n].iter().map(|v| v / s));
        let base = mm_from_point_cloud(&PointCloud::new(x.clone(), w).unwrap()).unwrap();
        let space = StructuredSpace::new(base, Array2::from_shape_fn((n, 1), |(i, _)| feats[i])).unwrap();
        let json = parse_space(&format_space(&space, SpaceFormat::JsonStructured), SpaceFormat::JsonStructured).unwrap();
        prop_assert_eq!(&json, &space);
        let csv = parse_space(&format_space(&space, SpaceFormat::CsvMatrix), SpaceFormat::CsvMatrix).unwrap();
        prop_assert_eq!(csv.base().distances(), space.base().distances());
    }
}
