use domain_lab::localization::LocalizationCase;
use domain_lab::*;

fn sweep(g: &Grid, centers: &[(f64, f64)], radii: &[f64]) -> Vec<(Point, f64, LocalizationResult)> {
    let mut out = Vec::new();
    for &(x, y) in centers {
        for &r in radii {
            let x0 = Point::new(x, y);
            let res = verify_localization(g, localize(g, x0, r, 1.0).unwrap(), x0, r).unwrap();
            out.push((x0, r, res));
        }
    }
    out
}

#[test]
fn uniform_domains_localize_everywhere() {
    let h = 1.0 / 64.0;
    let radii = [0.05, 0.1, 0.15, 0.2];
    let cases: [(&str, Vec<f64>, [(f64, f64); 5]); 3] = [
        ("disk", vec![], [(0.0, 0.0), (0.5, 0.0), (0.0, -0.6), (-0.4, 0.4), (0.75, 0.25)]),
        ("square", vec![], [(0.5, 0.5), (0.2, 0.2), (0.8, 0.3), (0.1, 0.9), (0.6, 0.85)]),
        ("rooms_and_corridors", vec![3.0, 0.25], [(0.25, 0.25), (1.0, 0.25), (0.625, 0.25), (1.9, 0.4), (0.1, 0.1)]),
    ];
    for (name, params, centers) in cases {
        let g = discretize(&gallery::make(name, &params).unwrap().domain, h).unwrap();
        for (x0, r, res) in sweep(&g, &centers, &radii) {
            assert!(res.sandwich_ok && res.john_ok, "{name} at {x0:?}, r = {r}: {:?}", res.witnesses);
            if res.case != LocalizationCase::WholeDomain {
                assert_eq!(res.lambda, 7.25);
                assert_eq!(res.c0, 1.0 / 18.0);
            }
            let c = g.point(g.snap(x0).unwrap());
            assert!(g.nodes_within(c, r).iter().all(|&n| res.region[n as usize]));
        }
    }
}

#[test]
fn region_contains_ball_on_slit_disk() {
    let g = discretize(&gallery::slit_disk(1.0 / 64.0, 64).unwrap().domain, 1.0 / 64.0).unwrap();
    for (x0, r, res) in sweep(&g, &[(0.5, 0.05), (-0.3, 0.2), (0.2, -0.1)], &[0.05, 0.1, 0.2]) {
        let c = g.point(g.snap(x0).unwrap());
        assert!(g.nodes_within(c, r).iter().all(|&n| res.region[n as usize]), "{x0:?} {r}");
    }
}
