use domain_lab::*;
use proptest::prelude::*;

fn entry(name: &str) -> PolygonalDomain {
    gallery::make(name, &[]).unwrap().domain
}

/// Rejection-samples a point of the domain from `(u, v) ∈ [0, 1)²`.
fn inside(d: &PolygonalDomain, mut u: f64, mut v: f64) -> Point {
    let (lo, hi) = d.bounding_box();
    for _ in 0..64 {
        let p = Point::new(lo.x + u * (hi.x - lo.x), lo.y + v * (hi.y - lo.y));
        if d.contains(p) {
            return p;
        }
        // golden-ratio stepping keeps the draw deterministic
        u = (u + 0.618_033_988_749_895).fract();
        v = (v + 0.414_213_562_373_095).fract();
    }
    panic!("no interior point found");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_distance_is_lipschitz(
        name in prop::sample::select(vec!["l_shape", "slit_disk", "disk", "rooms_and_corridors"]),
        a in (0.0f64..1.0, 0.0f64..1.0),
        b in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let d = entry(name);
        let (x, y) = (inside(&d, a.0, a.1), inside(&d, b.0, b.1));
        prop_assume!(d.segment_inside(x, y));
        for k in 0..8 {
            let p = x.lerp(y, k as f64 / 8.0);
            let q = x.lerp(y, (k as f64 + 0.5) / 8.0);
            let gap = (d.boundary_distance(p).unwrap() - d.boundary_distance(q).unwrap()).abs();
            prop_assert!(gap <= p.dist(q) * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn boundary_distance_concave_on_convex_domains(
        name in prop::sample::select(vec!["square", "disk", "rectangle"]),
        a in (0.0f64..1.0, 0.0f64..1.0),
        b in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let d = entry(name);
        let (x, y) = (inside(&d, a.0, a.1), inside(&d, b.0, b.1));
        let mid = d.boundary_distance(x.midpoint(y)).unwrap();
        let ends = d.boundary_distance(x).unwrap().min(d.boundary_distance(y).unwrap());
        prop_assert!(mid >= ends - 1e-12);
    }

    #[test]
    fn similarity_scales_lengths(
        s in 0.25f64..4.0,
        rot in -3.2f64..3.2,
        shift in (-5.0f64..5.0, -5.0f64..5.0),
        a in (0.0f64..1.0, 0.0f64..1.0),
        b in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let d = entry("l_shape");
        let shift = Point::new(shift.0, shift.1);
        let d2 = d.similarity_transform(s, rot, shift).unwrap();
        let m = |p: Point| {
            let (sn, cs) = rot.sin_cos();
            Point::new(s * (cs * p.x - sn * p.y), s * (sn * p.x + cs * p.y)) + shift
        };
        let (x, y) = (inside(&d, a.0, a.1), inside(&d, b.0, b.1));
        prop_assume!(d2.contains(m(x)) && d2.contains(m(y)));
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        prop_assert!(rel(d2.boundary_distance(m(x)).unwrap(), s * d.boundary_distance(x).unwrap()) < 1e-12);
        let l1 = intrinsic_distance(&d, x, y).unwrap();
        let l2 = intrinsic_distance(&d2, m(x), m(y)).unwrap();
        prop_assert!(rel(l2, s * l1) < 1e-12 || (l1 == 0.0 && l2 < 1e-12));
        prop_assert!(rel(d2.diameter(), s * d.diameter()) < 1e-12);
    }
}

#[test]
fn refinement_never_splits_components() {
    let d = gallery::rooms_and_corridors(3, 1.0 / 40.0).unwrap().domain;
    let counts: Vec<usize> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
        .iter()
        .map(|&h| discretize(&d, h).unwrap().component_count())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert_eq!(counts[0], 3);
    assert_eq!(*counts.last().unwrap(), 1);
}
