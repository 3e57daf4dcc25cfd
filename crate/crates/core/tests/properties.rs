use edgepriv::engine::{apportion, DenialReasons};
use edgepriv::geometry::{Area, Point};
use edgepriv::link::{
    bs_mh_latency, proportional_fair_allocate, shannon_capacity, snr_linear, LatencyParams, RadioParams,
};
use edgepriv::metrics::{classify, confidence_interval, RequestClass};
use edgepriv::privacy::{planar_laplace_radius, Epsilon};
use edgepriv::topology::GridIndex;
use edgepriv::ExperimentConfig;
use proptest::prelude::*;

fn brute_nearest(points: &[Point], q: Point) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.distance_sq(q) < points[best].distance_sq(q) {
            best = i;
        }
    }
    best
}

fn pf_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..20).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..200.0, n),
            prop::collection::vec(prop_oneof![Just(f64::INFINITY), 0.0f64..200.0], n),
            0.0f64..1500.0,
        )
    })
}

proptest! {
    #[test]
    fn pf_respects_caps_and_capacity((d, c, cap) in pf_instance()) {
        let x = proportional_fair_allocate(&d, &c, cap);
        let total: f64 = x.iter().sum();
        prop_assert!(total <= cap * (1.0 + 1e-12) + 1e-9);
        let mut wants_sum = 0.0;
        let mut positive = 0;
        for i in 0..d.len() {
            let want = d[i].min(c[i]);
            wants_sum += want;
            positive += (want > 0.0) as usize;
            prop_assert!(x[i] >= 0.0 && x[i] <= want + 1e-9);
        }
        if wants_sum >= cap && positive >= 2 {
            prop_assert!((total - cap).abs() <= 1e-9 * cap.max(1.0));
        }
        if wants_sum <= cap {
            for i in 0..d.len() {
                prop_assert!((x[i] - d[i].min(c[i])).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn pf_is_order_equivariant((d, c, cap) in pf_instance()) {
        let x = proportional_fair_allocate(&d, &c, cap);
        let rd: Vec<f64> = d.iter().rev().copied().collect();
        let rc: Vec<f64> = c.iter().rev().copied().collect();
        let rx = proportional_fair_allocate(&rd, &rc, cap);
        for (a, b) in x.iter().zip(rx.iter().rev()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn nearest_matches_scan(
        pts in prop::collection::vec((0.0f64..500.0, 0.0f64..300.0), 1..60),
        qs in prop::collection::vec((-50.0f64..550.0, -50.0f64..350.0), 1..40),
    ) {
        let area = Area::new(500.0, 300.0).unwrap();
        let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let index = GridIndex::build(&points, &area).unwrap();
        for (x, y) in qs {
            let q = Point::new(x, y);
            prop_assert_eq!(index.nearest(q), brute_nearest(&points, q));
        }
    }

    #[test]
    fn nearest_on_integer_lattice_breaks_ties_low(
        pts in prop::collection::vec((0u8..10, 0u8..10), 1..30),
        qs in prop::collection::vec((0u8..20, 0u8..20), 1..20),
    ) {
        let area = Area::new(10.0, 10.0).unwrap();
        let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
        let index = GridIndex::build(&points, &area).unwrap();
        for (x, y) in qs {
            let q = Point::new(x as f64 / 2.0, y as f64 / 2.0);
            prop_assert_eq!(index.nearest(q), brute_nearest(&points, q));
        }
    }

    #[test]
    fn apportionment_sums_and_is_near_proportional(n in 0usize..5000, a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.1f64..100.0) {
        let shares = [a, b, c];
        let got = apportion(n, &shares);
        prop_assert_eq!(got.iter().sum::<usize>(), n);
        let total = a + b + c;
        for (g, s) in got.iter().zip(shares) {
            prop_assert!((*g as f64 - n as f64 * s / total).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn denial_flags_round_trip(l: bool, t: bool, c: bool) {
        let r = DenialReasons::from_flags(l, t, c);
        prop_assert_eq!(r.contains(DenialReasons::LATENCY), l);
        prop_assert_eq!(r.contains(DenialReasons::THROUGHPUT), t);
        prop_assert_eq!(r.contains(DenialReasons::CAPACITY), c);
        prop_assert_eq!(r.is_empty(), !(l || t || c));
    }

    #[test]
    fn classes_partition_every_pattern(pattern in prop::collection::vec(any::<bool>(), 1..6)) {
        let class = classify(pattern.iter().copied());
        let all = pattern.iter().all(|&a| a);
        let none = pattern.iter().all(|&a| !a);
        prop_assert_eq!(class == RequestClass::AlwaysOffloaded, all);
        prop_assert_eq!(class == RequestClass::NeverOffloaded, none);
        prop_assert_eq!(class == RequestClass::PrivacyDependent, !all && !none);
    }

    #[test]
    fn link_model_is_monotone(d1 in 0.0f64..3000.0, d2 in 0.0f64..3000.0, bw in 1.0f64..1e8, s1 in 0.0f64..1e6, s2 in 0.0f64..1e6) {
        let radio = RadioParams::default();
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(snr_linear(near, &radio) >= snr_linear(far, &radio));
        if near >= radio.min_distance_m && far > near * (1.0 + 1e-9) {
            prop_assert!(snr_linear(near, &radio) > snr_linear(far, &radio));
        }
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(shannon_capacity(bw, lo) <= shannon_capacity(bw, hi));
        prop_assert!(shannon_capacity(bw, lo) <= shannon_capacity(bw * 2.0, lo));
        let lat = LatencyParams::default();
        prop_assert!(bs_mh_latency(near, &lat) <= bs_mh_latency(far, &lat));
    }

    #[test]
    fn laplace_radius_is_monotone_in_p(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, eps in 0.001f64..1.0) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(planar_laplace_radius(eps, lo) <= planar_laplace_radius(eps, hi) + 1e-9);
        prop_assert!(planar_laplace_radius(eps, lo) >= 0.0);
    }

    #[test]
    fn ci_contains_mean_and_is_shift_invariant(v in prop::collection::vec(-1e3f64..1e3, 2..20), shift in -1e3f64..1e3) {
        let a = confidence_interval(&v);
        let moved: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let b = confidence_interval(&moved);
        prop_assert!(a.ci95.unwrap() >= 0.0);
        prop_assert!((a.ci95.unwrap() - b.ci95.unwrap()).abs() <= 1e-6 * (1.0 + a.ci95.unwrap()));
        prop_assert!((a.mean.unwrap() + shift - b.mean.unwrap()).abs() <= 1e-9 * (1.0 + shift.abs() + a.mean.unwrap().abs()));
    }

    #[test]
    fn epsilon_labels_round_trip(e in prop_oneof![Just(f64::INFINITY), 1e-6f64..10.0]) {
        let eps = Epsilon::new(e).unwrap();
        prop_assert_eq!(eps.label().parse::<Epsilon>().unwrap(), eps);
    }
}

#[test]
fn config_hash_ignores_key_order() {
    let a = ExperimentConfig::from_toml_str("duration_s = 60.0\n[area]\nwidth = 500.0\nheight = 400.0\n").unwrap();
    let b = ExperimentConfig::from_toml_str("[area]\nheight = 400.0\nwidth = 500.0\n[privacy]\n").unwrap();
    let b = ExperimentConfig { duration_s: 60.0, ..b };
    assert_eq!(a.hash(), b.hash());
    let c = ExperimentConfig {
        duration_s: 61.0,
        ..a.clone()
    };
    assert_ne!(a.hash(), c.hash());
}
