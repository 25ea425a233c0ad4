use domain_lab::conditions::*;
use domain_lab::*;

fn grid(name: &str, h: f64) -> Grid {
    discretize(&gallery::make(name, &[]).unwrap().domain, h).unwrap()
}

fn deepest(g: &Grid) -> Point {
    let n = (0..g.len() as NodeId)
        .max_by(|&a, &b| g.dist(a).total_cmp(&g.dist(b)))
        .unwrap();
    g.point(n)
}

fn estimates(g: &Grid, s: &Sampler) -> Vec<ConditionEstimate> {
    let c = deepest(g);
    vec![
        quasiconvexity_constant(g, s).unwrap(),
        uniformity_estimate(g, s).unwrap(),
        john_estimate(g, c, s).unwrap(),
        llc2_estimate(g, s).unwrap(),
        cigar_constant(g, 0.5, 0.5, s).unwrap(),
        carrot_constant(g, 0.5, c, s).unwrap(),
        ahlfors_constant(g, false, s).unwrap(),
        ahlfors_constant(g, true, s).unwrap(),
    ]
}

fn probe(kind: ConditionKind, witness: Witness) -> ConditionEstimate {
    ConditionEstimate {
        kind,
        constant: f64::NAN,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: None,
        params: String::new(),
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let g = grid("l_shape", 1.0 / 32.0);
    let s = Sampler::new(5, 48, 6);
    let a = estimates(&g, &s);
    let b = estimates(&g, &s);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.constant.to_bits(), y.constant.to_bits(), "{:?}", x.kind);
        assert_eq!(x.witness, y.witness);
    }
}

#[test]
fn more_pairs_only_tighten() {
    let g = grid("slit_disk", 1.0 / 32.0);
    let small = estimates(&g, &Sampler::new(1, 24, 6));
    let large = estimates(&g, &Sampler::new(1, 96, 6));
    for (a, b) in small.iter().zip(&large) {
        match a.kind {
            ConditionKind::Uniform | ConditionKind::John | ConditionKind::Ahlfors | ConditionKind::AhlforsIntrinsic => {
                assert!(b.constant <= a.constant, "{:?}: {} -> {}", a.kind, a.constant, b.constant)
            }
            ConditionKind::Quasiconvex | ConditionKind::Cigar { .. } | ConditionKind::Carrot { .. } => {
                assert!(b.constant >= a.constant, "{:?}: {} -> {}", a.kind, a.constant, b.constant)
            }
            ConditionKind::Llc2 => {}
        }
    }
}

#[test]
fn scale_two_recomputation() {
    // lengths are exact on a dyadic grid; carrot scales as s^α
    let d = gallery::make("l_shape", &[]).unwrap().domain;
    let h = 1.0 / 32.0;
    let shift = Point::new(-1.5, 0.25);
    let s = Sampler::new(2, 48, 6);
    let a = estimates(&discretize(&d, h).unwrap(), &s);
    let b = estimates(&discretize(&d.similarity_transform(2.0, 0.0, shift).unwrap(), 2.0 * h).unwrap(), &s);
    for (x, y) in a.iter().zip(&b) {
        let w = match x.kind {
            ConditionKind::Carrot { alpha } => 2f64.powf(alpha),
            _ => 1.0,
        };
        assert!((y.constant / w - x.constant).abs() <= 0.05 * x.constant, "{:?}: {} vs {}", x.kind, x.constant, y.constant);
    }
}

#[test]
fn gallery_flags_at_h_128() {
    let h = 1.0 / 128.0;
    let s = Sampler::new(0, 64, 8);
    for name in gallery::NAMES {
        let entry = gallery::make(name, &[]).unwrap();
        let g = discretize(&entry.domain, h).unwrap();
        let e = &entry.expected;
        if e.uniform == Flag::Yes {
            let u = uniformity_estimate(&g, &s).unwrap().constant;
            assert!(u >= 0.1, "{name}: uniform {u}");
        }
        if e.john == Flag::Yes {
            let j = john_estimate(&g, deepest(&g), &s).unwrap().constant;
            assert!(j >= 0.02, "{name}: john {j}");
        }
        // the lattice: a clearly uniform sample implies a positive John constant
        let u = uniformity_estimate(&g, &s).unwrap().constant;
        if u > 0.05 {
            assert!(john_estimate(&g, deepest(&g), &s).unwrap().constant > 0.0, "{name}");
        }
        if e.cigar_profile == Some(1.0) {
            let c = cigar_constant(&g, 0.5, 0.5, &s).unwrap().constant;
            assert!(c.is_finite(), "{name}: cigar {c}");
        }
    }
}

#[test]
fn slit_disk_uniformity_degenerates_with_width() {
    let s = Sampler::new(0, 64, 8);
    let eps: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
        .iter()
        .map(|&w| {
            let g = discretize(&gallery::slit_disk(w, 64).unwrap().domain, 1.0 / 128.0).unwrap();
            uniformity_estimate(&g, &s).unwrap().constant
        })
        .collect();
    assert!(eps.windows(2).all(|p| p[1] < p[0]), "{eps:?}");
    assert!(eps[2] < 0.05, "{eps:?}");
}

#[test]
fn cusp_is_neither_john_nor_uniform() {
    // refining h exposes nodes closer to the tip and both constants fall
    let d = gallery::power_cusp(2.0).unwrap().domain;
    let mut john = Vec::new();
    let mut uniform = Vec::new();
    for h in [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0] {
        let g = discretize(&d, h).unwrap();
        let tip = (0..g.len() as NodeId)
            .min_by(|&a, &b| g.point(a).x.total_cmp(&g.point(b).x))
            .map(|n| g.point(n))
            .unwrap();
        let c = deepest(&g);
        john.push(probe(ConditionKind::John, Witness::Centered { x: tip, center: c }).reevaluate(&g).unwrap());
        uniform.push(probe(ConditionKind::Uniform, Witness::Pair { x: tip, y: c }).reevaluate(&g).unwrap());
    }
    for v in [&john, &uniform] {
        assert!(v.windows(2).all(|p| p[1] < p[0]), "{v:?}");
        assert!(v[2] < 0.5 * v[0], "{v:?}");
    }
}
