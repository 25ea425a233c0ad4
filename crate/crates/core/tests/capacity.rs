use domain_lab::*;

fn plates(g: &Grid) -> CapacityProblem {
    let u = g.nodes_within(Point::new(0.3, 0.5), 0.1);
    let v = g.nodes_within(Point::new(0.7, 0.5), 0.1);
    CapacityProblem::new(g, u, v, 2.0).unwrap()
}

#[test]
fn capacity_shrinks_on_a_subdomain() {
    let h = 1.0 / 32.0;
    let square = gallery::square().unwrap().domain;
    let sub = PolygonalDomain::new(
        vec![
            Point::new(0.125, 0.25),
            Point::new(0.875, 0.25),
            Point::new(0.875, 0.75),
            Point::new(0.125, 0.75),
        ],
        vec![],
        "strip",
    )
    .unwrap();
    let (g1, g2) = (discretize(&square, h).unwrap(), discretize(&sub, h).unwrap());
    let (p1, p2) = (plates(&g1), plates(&g2));
    // both grids share the node lattice, so the plates are the same points
    let pts = |g: &Grid, s: &[NodeId]| s.iter().map(|&n| g.point(n)).collect::<Vec<_>>();
    assert_eq!(pts(&g1, &p1.u_set), pts(&g2, &p2.u_set));
    assert_eq!(pts(&g1, &p1.v_set), pts(&g2, &p2.v_set));
    let (c1, c2) = (capacity(&g1, &p1).unwrap(), capacity(&g2, &p2).unwrap());
    assert!(c2 <= c1, "{c2} > {c1}");
    assert!(c2 > 0.5 * c1);
}
