//! Intrinsic distance and weighted geodesics.
//!
//! Exact intrinsic distances come from the visibility graph over the reflex
//! vertices: a shortest path inside a polygon with holes is a polyline that
//! bends only at reflex vertices. Weighted geodesics minimizing
//! `∫ dist(z, ∂Ω)^(α-1) |dz|` run Dijkstra on the grid graph with the
//! integrand evaluated at edge midpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::curve::Curve;
use crate::domain::PolygonalDomain;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{Grid, NodeId, NONE};

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    node: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // min-heap on cost, ties broken by the smaller index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Visibility graph on the reflex vertices of a domain.
#[derive(Debug, Clone)]
pub struct VisibilityGraph {
    domain: PolygonalDomain,
    reflex: Vec<Point>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl VisibilityGraph {
    pub fn new(domain: &PolygonalDomain) -> Self {
        let reflex = domain.reflex_vertices();
        let adj = (0..reflex.len())
            .into_par_iter()
            .map(|i| {
                (0..reflex.len())
                    .filter(|&j| j != i && domain.segment_in_closure(reflex[i], reflex[j]))
                    .map(|j| (j, reflex[i].dist(reflex[j])))
                    .collect()
            })
            .collect();
        Self {
            domain: domain.clone(),
            reflex,
            adj,
        }
    }

    pub fn domain(&self) -> &PolygonalDomain {
        &self.domain
    }

    pub fn reflex_vertices(&self) -> &[Point] {
        &self.reflex
    }

    fn visible(&self, a: Point, b: Point) -> bool {
        self.domain.segment_in_closure(a, b)
    }

    /// Distances from `x` to every reflex vertex through the closed domain,
    /// with predecessor links (`usize::MAX` means reached directly from `x`).
    fn reflex_tree(&self, x: Point) -> (Vec<f64>, Vec<usize>) {
        let r = self.reflex.len();
        let mut d = vec![f64::INFINITY; r];
        let mut pred = vec![usize::MAX; r];
        let mut heap = BinaryHeap::new();
        for (i, &v) in self.reflex.iter().enumerate() {
            if self.visible(x, v) {
                d[i] = x.dist(v);
                heap.push(HeapItem {
                    cost: d[i],
                    node: i as u32,
                });
            }
        }
        while let Some(HeapItem { cost, node }) = heap.pop() {
            let i = node as usize;
            if cost > d[i] {
                continue;
            }
            for &(j, w) in &self.adj[i] {
                let c = cost + w;
                if c < d[j] {
                    d[j] = c;
                    pred[j] = i;
                    heap.push(HeapItem {
                        cost: c,
                        node: j as u32,
                    });
                }
            }
        }
        (d, pred)
    }

    /// Shortest path inside the domain, or `None` if the endpoints lie in
    /// different components.
    pub fn shortest_path(&self, x: Point, y: Point) -> Result<Option<Curve>> {
        for p in [x, y] {
            if !self.domain.contains(p) {
                return Err(Error::OutsideDomain { x: p.x, y: p.y });
            }
        }
        if self.visible(x, y) {
            return Ok(Some(Curve::new([x, y])));
        }
        let (d, pred) = self.reflex_tree(x);
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, &v) in self.reflex.iter().enumerate() {
            let c = d[i] + v.dist(y);
            if c < best.0 && self.visible(v, y) {
                best = (c, i);
            }
        }
        if best.1 == usize::MAX {
            return Ok(None);
        }
        let mut pts = vec![y];
        let mut i = best.1;
        while i != usize::MAX {
            pts.push(self.reflex[i]);
            i = pred[i];
        }
        pts.push(x);
        pts.reverse();
        Ok(Some(Curve::new(pts)))
    }

    pub fn distance(&self, x: Point, y: Point) -> Result<f64> {
        Ok(self
            .shortest_path(x, y)?
            .map_or(f64::INFINITY, |c| c.length()))
    }

    /// Exact intrinsic distance from `x` to every node of `g`.
    pub fn distance_field(&self, g: &Grid, x: Point) -> Vec<f64> {
        self.distances_with_hint(x, g.points(), |i| g.dist(i as NodeId))
    }

    /// Exact intrinsic distances from `x` to each of `targets`.
    pub fn distances_from(&self, x: Point, targets: &[Point]) -> Vec<f64> {
        self.distances_with_hint(x, targets, |_| 0.0)
    }

    // `clear(i)` is a radius around target `i` known to lie inside the domain
    fn distances_with_hint(
        &self,
        x: Point,
        targets: &[Point],
        clear: impl Fn(usize) -> f64 + Sync,
    ) -> Vec<f64> {
        let (d, _) = self.reflex_tree(x);
        let mut order: Vec<usize> = (0..self.reflex.len()).filter(|&i| d[i].is_finite()).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        targets
            .par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let direct = x.dist(p);
                if direct < clear(i) {
                    return direct;
                }
                let mut cands: Vec<(f64, Option<usize>)> = Vec::with_capacity(order.len() + 1);
                cands.push((direct, None));
                cands.extend(order.iter().map(|&j| (d[j] + self.reflex[j].dist(p), Some(j))));
                cands.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (c, via) in cands {
                    let from = via.map_or(x, |j| self.reflex[j]);
                    if self.visible(from, p) {
                        return c;
                    }
                }
                f64::INFINITY
            })
            .collect()
    }
}

/// Exact intrinsic distance `d_Ω(x, y)`; infinite across components.
pub fn intrinsic_distance(d: &PolygonalDomain, x: Point, y: Point) -> Result<f64> {
    VisibilityGraph::new(d).distance(x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    pub curve: Curve,
    pub value: f64,
    pub alpha: f64,
    pub endpoints: (Point, Point),
}

/// Restrictions applied to the weighted graph.
#[derive(Debug, Clone, Copy, Default)]
pub struct GraphRestriction<'a> {
    /// Only nodes with `mask[n]` may be used.
    pub mask: Option<&'a [bool]>,
    /// Replacement boundary-distance field (per node); edge midpoints use the
    /// smaller of the true midpoint distance and the endpoint average.
    pub dist: Option<&'a [f64]>,
}

/// Single-source weighted shortest-path tree.
#[derive(Debug, Clone)]
pub struct GeodesicTree {
    source: NodeId,
    alpha: f64,
    value: Vec<f64>,
    parent: Vec<NodeId>,
}

impl GeodesicTree {
    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self, n: NodeId) -> f64 {
        self.value[n as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn reached(&self, n: NodeId) -> bool {
        self.value[n as usize].is_finite()
    }

    /// Node sequence from the source to `n`.
    pub fn node_path(&self, n: NodeId) -> Vec<NodeId> {
        if !self.reached(n) {
            return Vec::new();
        }
        let mut out = vec![n];
        let mut cur = n;
        while cur != self.source {
            cur = self.parent[cur as usize];
            out.push(cur);
        }
        out.reverse();
        out
    }

    pub fn path(&self, g: &Grid, n: NodeId) -> Curve {
        Curve::new(self.node_path(n).into_iter().map(|m| g.point(m)))
    }

    pub fn result(&self, g: &Grid, n: NodeId) -> GeodesicResult {
        let endpoints = (g.point(self.source), g.point(n));
        if n == self.source {
            return GeodesicResult {
                curve: Curve::default(),
                value: 0.0,
                alpha: self.alpha,
                endpoints,
            };
        }
        GeodesicResult {
            curve: self.path(g, n),
            value: self.value(n),
            alpha: self.alpha,
            endpoints,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

/// Weighted Dijkstra from `source`. For `alpha < 1` nodes closer than `h/2`
/// to the boundary are reached but never used as intermediate nodes. Stops
/// early once `target` is settled.
pub fn geodesic_tree(
    g: &Grid,
    source: NodeId,
    alpha: f64,
    restrict: GraphRestriction<'_>,
    target: Option<NodeId>,
) -> Result<GeodesicTree> {
    check_alpha(alpha)?;
    let n = g.len();
    let mut value = vec![f64::INFINITY; n];
    let mut parent = vec![NONE; n];
    let floor = if alpha < 1.0 { 0.5 * g.h() } else { 0.0 };
    let node_dist = |m: NodeId| restrict.dist.map_or(g.dist(m), |d| d[m as usize]);
    let in_mask = |m: NodeId| restrict.mask.map_or(true, |mask| mask[m as usize]);
    // near-boundary nodes can be reached but are never passed through
    let expandable = |m: NodeId| m == source || node_dist(m) >= floor;
    value[source as usize] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem {
        cost: 0.0,
        node: source,
    });
    let expo = alpha - 1.0;
    while let Some(HeapItem { cost, node }) = heap.pop() {
        if cost > value[node as usize] {
            continue;
        }
        if Some(node) == target {
            break;
        }
        if !expandable(node) {
            continue;
        }
        for (m, d) in g.neighbors(node) {
            if !in_mask(m) {
                continue;
            }
            let mut md = g.edge_mid_dist(node, d);
            if let Some(over) = restrict.dist {
                md = md.min(0.5 * (over[node as usize] + over[m as usize]));
            }
            let w = if alpha == 1.0 {
                g.edge_length(d)
            } else {
                g.edge_length(d) * md.max(f64::MIN_POSITIVE).powf(expo)
            };
            let c = cost + w;
            if c < value[m as usize] {
                value[m as usize] = c;
                parent[m as usize] = node;
                heap.push(HeapItem { cost: c, node: m });
            }
        }
    }
    Ok(GeodesicTree {
        source,
        alpha,
        value,
        parent,
    })
}

/// Grid geodesic minimizing `∫ dist^(α-1) |dz|` between the nodes nearest to
/// `x` and `y`. Disconnected endpoints give an infinite value and an empty
/// curve.
pub fn weighted_geodesic(g: &Grid, x: Point, y: Point, alpha: f64) -> Result<GeodesicResult> {
    check_alpha(alpha)?;
    let a = g.snap(x)?;
    let b = g.snap(y)?;
    let tree = geodesic_tree(g, a, alpha, GraphRestriction::default(), Some(b))?;
    if !tree.reached(b) {
        return Ok(GeodesicResult {
            curve: Curve::default(),
            value: f64::INFINITY,
            alpha,
            endpoints: (g.point(a), g.point(b)),
        });
    }
    Ok(tree.result(g, b))
}

pub fn quasihyperbolic_distance(g: &Grid, x: Point, y: Point) -> Result<f64> {
    Ok(weighted_geodesic(g, x, y, 0.0)?.value)
}

/// `∫_γ dist(z, ∂Ω)^(α-1) |dz|` by the midpoint rule on the curve segments.
pub fn curve_integral(d: &PolygonalDomain, curve: &Curve, alpha: f64) -> f64 {
    curve.integrate(|z| d.boundary_distance_unchecked(z).powf(alpha - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicBall {
    pub center: Point,
    pub radius: f64,
    pub nodes: Vec<NodeId>,
    pub measure: f64,
}

/// Nodes with `d_Ω(center, node) < r`, using the exact intrinsic distance
/// field.
pub fn intrinsic_ball(g: &Grid, x: Point, r: f64) -> Result<IntrinsicBall> {
    let vis = VisibilityGraph::new(g.domain());
    intrinsic_ball_with(g, &vis, x, r)
}

pub fn intrinsic_ball_with(
    g: &Grid,
    vis: &VisibilityGraph,
    x: Point,
    r: f64,
) -> Result<IntrinsicBall> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let c = g.point(g.snap(x)?);
    let candidates = g.nodes_within(c, r);
    let (d, _) = vis.reflex_tree(c);
    let nodes: Vec<NodeId> = candidates
        .into_par_iter()
        .filter(|&n| {
            let p = g.point(n);
            let direct = c.dist(p);
            if direct < g.dist(n) || vis.visible(c, p) {
                return true;
            }
            vis.reflex
                .iter()
                .enumerate()
                .any(|(i, &v)| d[i] + v.dist(p) < r && vis.visible(v, p))
        })
        .collect();
    let measure = nodes.len() as f64 * g.cell_area();
    Ok(IntrinsicBall {
        center: c,
        radius: r,
        nodes,
        measure,
    })
}
