//! Cell-centred discretization of a domain.
//!
//! Nodes are the centres of the square cells of side `h` that fall strictly
//! inside the domain. Two nodes are adjacent when they are 8-neighbours and
//! the straight segment between them stays inside the open domain, so the two
//! banks of a thin notch never connect across it.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::domain::PolygonalDomain;
use crate::error::{Error, Result};
use crate::geom::Point;

pub type NodeId = u32;
pub const NONE: NodeId = NodeId::MAX;

/// Neighbour offsets, counterclockwise from +x. `d` and `(d + 4) % 8` are
/// opposite directions.
pub const DIRS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

#[derive(Debug, Clone)]
pub struct Grid {
    domain: PolygonalDomain,
    h: f64,
    origin: Point,
    nx: usize,
    ny: usize,
    cell_node: Vec<NodeId>,
    node_cell: Vec<(u32, u32)>,
    points: Vec<Point>,
    dist: Vec<f64>,
    adj: Vec<u8>,
    // boundary distance at the midpoint of the four forward edges (dirs 0..4)
    mid_dist: Vec<[f64; 4]>,
    component: Vec<u32>,
    n_components: usize,
}

pub fn discretize(domain: &PolygonalDomain, h: f64) -> Result<Grid> {
    Grid::new(domain, h)
}

impl Grid {
    pub fn new(domain: &PolygonalDomain, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
        }
        let (lo, hi) = domain.bounding_box();
        let origin = Point::new((lo.x / h).floor() * h, (lo.y / h).floor() * h);
        let nx = ((hi.x - origin.x) / h).ceil().max(1.0) as usize;
        let ny = ((hi.y - origin.y) / h).ceil().max(1.0) as usize;
        if nx.saturating_mul(ny) > 40_000_000 {
            return Err(Error::InvalidParameter(format!(
                "grid spacing {h} gives {nx}x{ny} cells, too many"
            )));
        }

        let inside: Vec<Vec<bool>> = (0..ny)
            .into_par_iter()
            .map(|j| {
                (0..nx)
                    .map(|i| domain.contains(cell_center(origin, h, i, j)))
                    .collect()
            })
            .collect();

        let mut cell_node = vec![NONE; nx * ny];
        let mut node_cell = Vec::new();
        let mut points = Vec::new();
        for (j, row) in inside.iter().enumerate() {
            for (i, &ins) in row.iter().enumerate() {
                if ins {
                    cell_node[j * nx + i] = points.len() as NodeId;
                    node_cell.push((i as u32, j as u32));
                    points.push(cell_center(origin, h, i, j));
                }
            }
        }
        if points.len() < 4 {
            return Err(Error::EmptyGrid {
                h,
                narrowest_feature: domain.narrowest_feature(),
            });
        }

        let dist: Vec<f64> = points
            .par_iter()
            .map(|&p| domain.boundary_distance_unchecked(p))
            .collect();

        let lookup = |i: i64, j: i64| -> NodeId {
            if i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 {
                NONE
            } else {
                cell_node[j as usize * nx + i as usize]
            }
        };

        // forward edges only; the reverse direction is mirrored below
        let diag = h * std::f64::consts::SQRT_2;
        let forward: Vec<([bool; 4], [f64; 4])> = (0..points.len())
            .into_par_iter()
            .map(|n| {
                let (i, j) = node_cell[n];
                let mut ok = [false; 4];
                let mut mid = [f64::NAN; 4];
                for d in 0..4 {
                    let (di, dj) = DIRS[d];
                    let m = lookup(i as i64 + di as i64, j as i64 + dj as i64);
                    if m == NONE {
                        continue;
                    }
                    let (a, b) = (points[n], points[m as usize]);
                    let len = if d % 2 == 0 { h } else { diag };
                    let clear = dist[n] > len || dist[m as usize] > len;
                    if clear || domain.segment_inside(a, b) {
                        ok[d] = true;
                        mid[d] = domain.boundary_distance_unchecked(a.midpoint(b));
                    }
                }
                (ok, mid)
            })
            .collect();

        let mut adj = vec![0u8; points.len()];
        let mut mid_dist = vec![[f64::NAN; 4]; points.len()];
        for n in 0..points.len() {
            let (i, j) = node_cell[n];
            mid_dist[n] = forward[n].1;
            for d in 0..4 {
                if forward[n].0[d] {
                    let (di, dj) = DIRS[d];
                    let m = lookup(i as i64 + di as i64, j as i64 + dj as i64) as usize;
                    adj[n] |= 1 << d;
                    adj[m] |= 1 << (d + 4);
                }
            }
        }

        let mut grid = Self {
            domain: domain.clone(),
            h,
            origin,
            nx,
            ny,
            cell_node,
            node_cell,
            points,
            dist,
            adj,
            mid_dist,
            component: Vec::new(),
            n_components: 0,
        };
        let (labels, count) = grid.label_components(|_| true);
        grid.component = labels;
        grid.n_components = count;
        Ok(grid)
    }

    pub fn domain(&self) -> &PolygonalDomain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, n: NodeId) -> Point {
        self.points[n as usize]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Boundary distance of every node.
    pub fn dist_field(&self) -> &[f64] {
        &self.dist
    }

    pub fn dist(&self, n: NodeId) -> f64 {
        self.dist[n as usize]
    }

    pub fn cell(&self, n: NodeId) -> (u32, u32) {
        self.node_cell[n as usize]
    }

    pub fn node_at_cell(&self, i: i64, j: i64) -> Option<NodeId> {
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            return None;
        }
        let n = self.cell_node[j as usize * self.nx + i as usize];
        (n != NONE).then_some(n)
    }

    pub fn has_edge(&self, n: NodeId, d: usize) -> bool {
        self.adj[n as usize] & (1 << d) != 0
    }

    /// Neighbour in direction `d` if the edge exists.
    pub fn neighbor(&self, n: NodeId, d: usize) -> Option<NodeId> {
        if !self.has_edge(n, d) {
            return None;
        }
        let (i, j) = self.node_cell[n as usize];
        let (di, dj) = DIRS[d];
        self.node_at_cell(i as i64 + di as i64, j as i64 + dj as i64)
    }

    pub fn edge_length(&self, d: usize) -> f64 {
        if d % 2 == 0 {
            self.h
        } else {
            self.h * std::f64::consts::SQRT_2
        }
    }

    /// Boundary distance at the midpoint of the edge leaving `n` in direction `d`.
    pub fn edge_mid_dist(&self, n: NodeId, d: usize) -> f64 {
        if d < 4 {
            self.mid_dist[n as usize][d]
        } else {
            let m = self.neighbor(n, d).expect("edge exists");
            self.mid_dist[m as usize][d - 4]
        }
    }

    /// `(neighbour, direction)` pairs of all edges at `n`.
    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = (NodeId, usize)> + '_ {
        (0..8).filter_map(move |d| self.neighbor(n, d).map(|m| (m, d)))
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adj[n as usize].count_ones() as usize
    }

    pub fn component(&self, n: NodeId) -> u32 {
        self.component[n as usize]
    }

    pub fn component_count(&self) -> usize {
        self.n_components
    }

    pub fn is_connected(&self) -> bool {
        self.n_components == 1
    }

    /// Connected components of the subgraph induced by `allowed`. Excluded
    /// nodes get label `NONE`.
    pub fn label_components(&self, allowed: impl Fn(NodeId) -> bool) -> (Vec<u32>, usize) {
        let mut label = vec![NONE; self.len()];
        let mut count = 0u32;
        let mut queue = VecDeque::new();
        for s in 0..self.len() as NodeId {
            if label[s as usize] != NONE || !allowed(s) {
                continue;
            }
            label[s as usize] = count;
            queue.push_back(s);
            while let Some(n) = queue.pop_front() {
                for (m, _) in self.neighbors(n) {
                    if label[m as usize] == NONE && allowed(m) {
                        label[m as usize] = count;
                        queue.push_back(m);
                    }
                }
            }
            count += 1;
        }
        (label, count as usize)
    }

    /// Nearest node within distance `h` of `p`.
    pub fn snap(&self, p: Point) -> Result<NodeId> {
        let ci = ((p.x - self.origin.x) / self.h).floor() as i64;
        let cj = ((p.y - self.origin.y) / self.h).floor() as i64;
        let mut best: Option<(f64, NodeId)> = None;
        for j in (cj - 2)..=(cj + 2) {
            for i in (ci - 2)..=(ci + 2) {
                if let Some(n) = self.node_at_cell(i, j) {
                    let d = self.point(n).dist(p);
                    if d <= self.h && best.map_or(true, |(bd, bn)| d < bd || (d == bd && n < bn)) {
                        best = Some((d, n));
                    }
                }
            }
        }
        best.map(|(_, n)| n).ok_or(Error::SnapFailed {
            x: p.x,
            y: p.y,
            h: self.h,
        })
    }

    /// Nodes with `|node - center| < r`, in increasing id order.
    pub fn nodes_within(&self, center: Point, r: f64) -> Vec<NodeId> {
        let i0 = (((center.x - r - self.origin.x) / self.h).floor() as i64).max(0);
        let i1 = (((center.x + r - self.origin.x) / self.h).ceil() as i64).min(self.nx as i64 - 1);
        let j0 = (((center.y - r - self.origin.y) / self.h).floor() as i64).max(0);
        let j1 = (((center.y + r - self.origin.y) / self.h).ceil() as i64).min(self.ny as i64 - 1);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                if let Some(n) = self.node_at_cell(i, j) {
                    if self.point(n).dist(center) < r {
                        out.push(n);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn ball_mask(&self, center: Point, r: f64) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for n in self.nodes_within(center, r) {
            mask[n as usize] = true;
        }
        mask
    }

    /// Axis neighbour used by the discrete gradient along `axis` (0 = x,
    /// 1 = y): forward when available, otherwise backward. The sign is +1
    /// for forward and -1 for backward differences.
    pub fn gradient_stencil(&self, n: NodeId, axis: usize) -> Option<(NodeId, f64)> {
        let fwd = if axis == 0 { 0 } else { 2 };
        if let Some(m) = self.neighbor(n, fwd) {
            return Some((m, 1.0));
        }
        self.neighbor(n, fwd + 4).map(|m| (m, -1.0))
    }
}

fn cell_center(origin: Point, h: f64, i: usize, j: usize) -> Point {
    Point::new(
        origin.x + (i as f64 + 0.5) * h,
        origin.y + (j as f64 + 0.5) * h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn unit_square_quarter_spacing() {
        let d = gallery::square().unwrap().domain;
        let g = discretize(&d, 0.25).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.is_connected());
        // independent enumeration: corner cell has 3 of its 8 neighbours on the 4x4 board
        let corner = g.snap(Point::new(0.125, 0.125)).unwrap();
        let expected = DIRS
            .iter()
            .filter(|(di, dj)| {
                let (i, j) = (*di, *dj);
                (0..4).contains(&i) && (0..4).contains(&j)
            })
            .count();
        assert_eq!(expected, 3);
        assert_eq!(g.degree(corner), expected);
        let interior = g.snap(Point::new(0.375, 0.375)).unwrap();
        assert_eq!(g.degree(interior), 8);
    }

    #[test]
    fn too_coarse_is_empty() {
        let d = gallery::square().unwrap().domain;
        match discretize(&d, 1.0) {
            Err(Error::EmptyGrid { narrowest_feature, .. }) => assert_eq!(narrowest_feature, 1.0),
            other => panic!("expected empty grid, got {other:?}"),
        }
    }

    #[test]
    fn dist_field_positive_and_exact() {
        let d = gallery::disk(64).unwrap().domain;
        let g = discretize(&d, 1.0 / 32.0).unwrap();
        for n in 0..g.len() as NodeId {
            let p = g.point(n);
            assert!(g.dist(n) > 0.0);
            assert_eq!(g.dist(n), d.boundary_distance(p).unwrap());
        }
    }

    #[test]
    fn adjacency_symmetric_and_inside() {
        let d = gallery::slit_disk(1.0 / 16.0, 64).unwrap().domain;
        let g = discretize(&d, 1.0 / 32.0).unwrap();
        for n in 0..g.len() as NodeId {
            for (m, dir) in g.neighbors(n) {
                assert_eq!(g.neighbor(m, (dir + 4) % 8), Some(n));
                assert!(d.segment_inside(g.point(n), g.point(m)));
            }
        }
    }

    #[test]
    fn slit_banks_not_adjacent() {
        let w = 0.02;
        let d = gallery::slit_disk(w, 64).unwrap().domain;
        let h = 1.0 / 128.0;
        let g = discretize(&d, h).unwrap();
        let mut checked = 0;
        for n in 0..g.len() as NodeId {
            let p = g.point(n);
            if p.x > 0.1 && p.x < 0.9 && p.y > 0.0 && p.y < w {
                for (m, _) in g.neighbors(n) {
                    let q = g.point(m);
                    assert!(q.y > 0.0, "edge crosses the slit: {p:?} -> {q:?}");
                    // oracle: segment-inside test on the explicit ring
                    assert!(d.segment_inside(p, q));
                }
                // the cell straight below across the slit is never a neighbour
                let below = g.snap(Point::new(p.x, -p.y));
                if let Ok(b) = below {
                    assert!(g.neighbors(n).all(|(m, _)| m != b));
                    assert!(!d.segment_inside(p, g.point(b)));
                    checked += 1;
                }
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn snap_rejects_far_points() {
        let d = gallery::square().unwrap().domain;
        let g = discretize(&d, 0.25).unwrap();
        assert!(g.snap(Point::new(0.5, 0.5)).is_ok());
        assert!(matches!(g.snap(Point::new(3.0, 3.0)), Err(Error::SnapFailed { .. })));
    }

    #[test]
    fn refinement_does_not_split_components() {
        let d = gallery::rooms_and_corridors(3, 1.0 / 16.0).unwrap().domain;
        let mut last = usize::MAX;
        for k in [4, 5, 6, 7] {
            let g = discretize(&d, 0.5f64.powi(k)).unwrap();
            assert!(g.component_count() <= last);
            last = g.component_count();
        }
        assert_eq!(last, 1);
    }
}
