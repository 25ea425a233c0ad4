//! Constructive John localization of a uniform domain.
//!
//! Given `x0`, `r` and a uniformity constant `eps0`, builds the region
//! `Ω_r = ⋃ G_x ∪ B(z0, r)` whose sets `G_x` are unions of balls along the
//! uniform curves joining `z0` to the points `x` of `B(x0, r) \ B(z0, r)`,
//! then checks `B(x0, r) ∩ Ω ⊂ Ω_r ⊂ B(x0, λr) ∩ Ω` and the John property of
//! `Ω_r` with center `z0`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::conditions::{
    best_john_curve, best_uniform_curve, candidate_trees, Candidate, MIN_SEPARATION_CELLS,
};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{Grid, NodeId, DIRS};
use crate::metric::{GraphRestriction, VisibilityGraph};

/// Allowance on the John constant check.
pub const TOL_DISC: f64 = 0.25;

/// At most this many region nodes are tested in the John check.
const JOHN_CHECK_NODES: usize = 2500;

/// `λ = 1 + (ε0 + 4)² / (4 ε0²)`.
pub fn lambda_for(eps0: f64) -> f64 {
    1.0 + (eps0 + 4.0).powi(2) / (4.0 * eps0 * eps0)
}

/// `c0 = ε0³ / (6 (ε0 + 2))`.
pub fn c0_for(eps0: f64) -> f64 {
    eps0.powi(3) / (6.0 * (eps0 + 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalizationCase {
    /// No point of Ω is `4r/ε0` away from `x0`; the region is all of Ω.
    WholeDomain,
    Constructed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalizationWitness {
    /// Node of `B(x0, r)` missing from the region.
    NotCovered(Point),
    /// Region node outside `B(x0, λr)`.
    OutsideDilation(Point),
    /// Region node whose best John curve has parameter `c`.
    JohnFailure { x: Point, c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub region: Vec<bool>,
    pub z0: Point,
    pub y0: Option<Point>,
    pub lambda: f64,
    pub c0: f64,
    pub case: LocalizationCase,
    pub sandwich_ok: bool,
    pub john_ok: bool,
    /// Sampled John constant of the region, once verified.
    pub john_constant: Option<f64>,
    /// Smallest uniformity parameter among the curves used.
    pub min_curve_eps: f64,
    /// How often each candidate curve won, as `(label, count)`.
    pub winners: Vec<(String, usize)>,
    pub witnesses: Vec<LocalizationWitness>,
}

impl LocalizationResult {
    pub fn region_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.region
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i as NodeId)
    }

    pub fn region_size(&self) -> usize {
        self.region.iter().filter(|&&m| m).count()
    }
}

fn check_inputs(g: &Grid, r: f64, eps0: f64) -> Result<()> {
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps0 must lie in (0, 1], got {eps0}")));
    }
    if !(r > 0.0 && r < g.domain().diameter()) {
        return Err(Error::InvalidParameter(format!(
            "radius must lie in (0, diam), got {r}"
        )));
    }
    Ok(())
}

/// Builds the localized region; flags are filled by [`verify_localization`].
pub fn localize(g: &Grid, x0: Point, r: f64, eps0: f64) -> Result<LocalizationResult> {
    check_inputs(g, r, eps0)?;
    let root = g.snap(x0)?;
    let c = g.point(root);
    let reach = 4.0 * r / eps0;
    let h = g.h();

    let far: Vec<NodeId> = (0..g.len() as NodeId)
        .filter(|&n| g.point(n).dist(c) >= reach)
        .collect();
    if far.is_empty() {
        return Ok(LocalizationResult {
            region: vec![true; g.len()],
            z0: c,
            y0: None,
            lambda: 4.0 / eps0,
            c0: c0_for(eps0),
            case: LocalizationCase::WholeDomain,
            sandwich_ok: false,
            john_ok: false,
            john_constant: None,
            min_curve_eps: f64::NAN,
            winners: Vec::new(),
            witnesses: Vec::new(),
        });
    }

    // y0: deepest node within ±h of the sphere, else the nearest beyond it
    let band: Vec<NodeId> = (0..g.len() as NodeId)
        .filter(|&n| (g.point(n).dist(c) - reach).abs() <= h && g.component(n) == g.component(root))
        .collect();
    let y0 = if band.is_empty() {
        *far
            .iter()
            .min_by(|&&a, &&b| g.point(a).dist(c).total_cmp(&g.point(b).dist(c)).then(a.cmp(&b)))
            .expect("far is nonempty")
    } else {
        *band
            .iter()
            .max_by(|&&a, &&b| g.dist(a).total_cmp(&g.dist(b)).then(b.cmp(&a)))
            .expect("band is nonempty")
    };

    let vis = VisibilityGraph::new(g.domain());
    let trees0 = candidate_trees(g, root, GraphRestriction::default())?;
    let fail = |a: Point, b: Point, message: &str| Error::Localization {
        ax: a.x,
        ay: a.y,
        bx: b.x,
        by: b.y,
        message: message.to_string(),
    };
    let (eps_g0, cand0, gamma0) = best_uniform_curve(g, Some(&vis), &trees0, y0, None)?
        .ok_or_else(|| fail(c, g.point(y0), "no curve joins the pair"))?;
    if !(eps_g0 > 0.0) {
        return Err(fail(c, g.point(y0), "no candidate curve has positive uniformity"));
    }

    // z0: first sample of γ0 at distance 2r/ε0 from x0, snapped to a node
    let target = 2.0 * r / eps0;
    let samples = gamma0.samples(h / 2.0);
    let zp = samples
        .iter()
        .find(|(_, p)| p.dist(c) >= target)
        .map(|&(_, p)| p)
        .unwrap_or_else(|| gamma0.end().expect("curve is nonempty"));
    let z0n = g.snap(zp)?;
    let z0 = g.point(z0n);

    let mut region = g.ball_mask(z0, r);
    let xs: Vec<NodeId> = g
        .nodes_within(c, r)
        .into_iter()
        .filter(|&n| g.point(n).dist(z0) >= r)
        .collect();

    let trees = candidate_trees(g, z0n, GraphRestriction::default())?;
    let quarter = h / 4.0;
    let origin = g.origin();
    let key_of = |p: Point| {
        (
            ((p.x - origin.x) / quarter).round() as i64,
            ((p.y - origin.y) / quarter).round() as i64,
        )
    };

    struct Piece {
        discs: Vec<((i64, i64), f64)>,
        spine: Vec<NodeId>,
        eps: f64,
        winner: Candidate,
    }
    let pieces: Vec<Piece> = xs
        .par_iter()
        .map(|&x| {
            let xp = g.point(x);
            let (eps, cand, curve) = best_uniform_curve(g, Some(&vis), &trees, x, None)?
                .ok_or_else(|| fail(z0, xp, "no curve joins the pair"))?;
            if !(eps > 0.0) {
                return Err(fail(z0, xp, "no candidate curve has positive uniformity"));
            }
            let dzx = xp.dist(z0);
            let mut discs = Vec::new();
            let mut spine = vec![x];
            for (_, v) in curve.samples(h / 2.0) {
                let rho = eps0 * xp.dist(v) * z0.dist(v) / dzx;
                let key = key_of(v);
                let centre = lattice_point(origin, quarter, key);
                // shrink by the snapping shift so the disc stays inside the exact one
                let rho = rho - centre.dist(v);
                if rho > 0.0 {
                    discs.push((key, rho));
                }
                if let Ok(n) = g.snap(v) {
                    spine.push(n);
                }
            }
            Ok(Piece {
                discs,
                spine,
                eps,
                winner: cand,
            })
        })
        .collect::<Result<_>>()?;

    let mut radius: HashMap<(i64, i64), f64> = HashMap::new();
    let mut min_eps = eps_g0;
    let mut wins: Vec<(String, usize)> = Vec::new();
    for piece in &pieces {
        for &(k, rho) in &piece.discs {
            let e = radius.entry(k).or_insert(0.0);
            if rho > *e {
                *e = rho;
            }
        }
        for &n in &piece.spine {
            region[n as usize] = true;
        }
        min_eps = min_eps.min(piece.eps);
        let label = piece.winner.to_string();
        match wins.iter_mut().find(|(l, _)| *l == label) {
            Some((_, c)) => *c += 1,
            None => wins.push((label, 1)),
        }
    }
    wins.sort();
    let mut discs: Vec<(Point, f64)> = radius
        .into_iter()
        .map(|(k, rho)| (lattice_point(origin, quarter, k), rho))
        .collect();
    discs.sort_by(|a, b| {
        (a.0.x, a.0.y)
            .partial_cmp(&(b.0.x, b.0.y))
            .unwrap_or(Ordering::Equal)
    });
    rasterize_discs(g, &discs, &mut region);

    Ok(LocalizationResult {
        region,
        z0,
        y0: Some(g.point(y0)),
        lambda: lambda_for(eps0),
        c0: c0_for(eps0),
        case: LocalizationCase::Constructed,
        sandwich_ok: false,
        john_ok: false,
        john_constant: None,
        min_curve_eps: min_eps,
        winners: wins,
        witnesses: vec![],
    }
    .with_initial_winner(cand0))
}

impl LocalizationResult {
    fn with_initial_winner(mut self, cand: Candidate) -> Self {
        self.winners.insert(0, (format!("gamma0:{cand}"), 1));
        self
    }
}

fn lattice_point(origin: Point, step: f64, key: (i64, i64)) -> Point {
    Point::new(origin.x + key.0 as f64 * step, origin.y + key.1 as f64 * step)
}

/// Marks every node strictly inside one of the discs, row by row.
fn rasterize_discs(g: &Grid, discs: &[(Point, f64)], mask: &mut [bool]) {
    let (nx, ny) = g.dims();
    let h = g.h();
    let o = g.origin();
    let mut rows: Vec<Vec<(i64, i64)>> = vec![Vec::new(); ny];
    for &(c, rho) in discs {
        let j0 = (((c.y - rho - o.y) / h - 0.5).floor() as i64).max(0);
        let j1 = (((c.y + rho - o.y) / h - 0.5).ceil() as i64).min(ny as i64 - 1);
        for j in j0..=j1 {
            let y = o.y + (j as f64 + 0.5) * h;
            let dy = y - c.y;
            let hw2 = rho * rho - dy * dy;
            if hw2 <= 0.0 {
                continue;
            }
            let hw = hw2.sqrt();
            let i0 = (((c.x - hw - o.x) / h - 0.5).floor() as i64 - 1).max(0);
            let i1 = (((c.x + hw - o.x) / h - 0.5).ceil() as i64 + 1).min(nx as i64 - 1);
            let inside = |i: i64| {
                let p = Point::new(o.x + (i as f64 + 0.5) * h, y);
                p.dist(c) < rho
            };
            let mut lo = i0;
            while lo <= i1 && !inside(lo) {
                lo += 1;
            }
            let mut hi = i1;
            while hi >= lo && !inside(hi) {
                hi -= 1;
            }
            if lo <= hi {
                rows[j as usize].push((lo, hi));
            }
        }
    }
    for (j, spans) in rows.iter_mut().enumerate() {
        spans.sort_unstable();
        let mut cur: Option<(i64, i64)> = None;
        let mut flush = |s: (i64, i64)| {
            for i in s.0..=s.1 {
                if let Some(n) = g.node_at_cell(i, j as i64) {
                    mask[n as usize] = true;
                }
            }
        };
        for &(a, b) in spans.iter() {
            cur = match cur {
                Some((ca, cb)) if a <= cb + 1 => Some((ca, cb.max(b))),
                Some(s) => {
                    flush(s);
                    Some((a, b))
                }
                None => Some((a, b)),
            };
        }
        if let Some(s) = cur {
            flush(s);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Front {
    d: f64,
    cell: (i64, i64),
    seed: (i64, i64),
}

impl Eq for Front {}

impl Ord for Front {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .d
            .total_cmp(&self.d)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distance from every region node to the boundary of the region: the
/// smaller of the domain boundary distance and half a cell short of the
/// nearest node outside the region. The latter is found by nearest-seed
/// propagation over the cell lattice.
pub fn region_boundary_distance(g: &Grid, region: &[bool]) -> Vec<f64> {
    let (nx, ny) = g.dims();
    let h = g.h();
    let mut best = vec![f64::INFINITY; nx * ny];
    let mut heap = BinaryHeap::new();
    for n in 0..g.len() as NodeId {
        if !region[n as usize] {
            let (i, j) = g.cell(n);
            let cell = (i as i64, j as i64);
            best[j as usize * nx + i as usize] = 0.0;
            heap.push(Front { d: 0.0, cell, seed: cell });
        }
    }
    while let Some(Front { d, cell, seed }) = heap.pop() {
        if d > best[cell.1 as usize * nx + cell.0 as usize] {
            continue;
        }
        for (di, dj) in DIRS {
            let nb = (cell.0 + di as i64, cell.1 + dj as i64);
            if nb.0 < 0 || nb.1 < 0 || nb.0 >= nx as i64 || nb.1 >= ny as i64 {
                continue;
            }
            let dd = (((nb.0 - seed.0) as f64).hypot((nb.1 - seed.1) as f64)) * h;
            let idx = nb.1 as usize * nx + nb.0 as usize;
            if dd < best[idx] {
                best[idx] = dd;
                heap.push(Front {
                    d: dd,
                    cell: nb,
                    seed,
                });
            }
        }
    }
    (0..g.len() as NodeId)
        .map(|n| {
            let (i, j) = g.cell(n);
            let to_seed = best[j as usize * nx + i as usize];
            g.dist(n).min((to_seed - 0.5 * h).max(0.0))
        })
        .collect()
}

/// Fills the sandwich and John flags.
pub fn verify_localization(
    g: &Grid,
    mut res: LocalizationResult,
    x0: Point,
    r: f64,
) -> Result<LocalizationResult> {
    if res.region.len() != g.len() {
        return Err(Error::InvalidParameter("region does not match the grid".into()));
    }
    let c = g.point(g.snap(x0)?);
    res.witnesses.clear();

    let mut sandwich = true;
    for n in g.nodes_within(c, r) {
        if !res.region[n as usize] {
            sandwich = false;
            res.witnesses.push(LocalizationWitness::NotCovered(g.point(n)));
            break;
        }
    }
    let outer = res.lambda * r;
    let outside = res.region_nodes().find(|&n| g.point(n).dist(c) >= outer);
    if let Some(n) = outside {
        sandwich = false;
        res.witnesses.push(LocalizationWitness::OutsideDilation(g.point(n)));
    }
    res.sandwich_ok = sandwich;

    let z0n = g.snap(res.z0)?;
    if !res.region[z0n as usize] {
        res.john_ok = false;
        res.john_constant = Some(0.0);
        return Ok(res);
    }
    let dist_r = region_boundary_distance(g, &res.region);
    let restrict = GraphRestriction {
        mask: Some(&res.region),
        dist: Some(&dist_r),
    };
    let trees = candidate_trees(g, z0n, restrict)?;
    let min_sep = MIN_SEPARATION_CELLS * g.h();
    let z0 = g.point(z0n);
    let nodes: Vec<NodeId> = res
        .region_nodes()
        .filter(|&n| g.point(n).dist(z0) >= min_sep)
        .collect();
    let stride = nodes.len().div_ceil(JOHN_CHECK_NODES).max(1);
    let checked: Vec<NodeId> = nodes.into_iter().step_by(stride).collect();
    let vals: Vec<(f64, NodeId)> = checked
        .par_iter()
        .map(|&x| {
            let v = best_john_curve(g, None, &trees, x, Some(&dist_r))?.map_or(0.0, |b| b.0);
            Ok((v, x))
        })
        .collect::<Result<_>>()?;
    let (worst, at) = vals
        .iter()
        .copied()
        .fold((1.0, None), |acc, (v, x)| if v < acc.0 { (v, Some(x)) } else { acc });
    res.john_constant = Some(worst);
    res.john_ok = worst >= res.c0 * (1.0 - TOL_DISC);
    if !res.john_ok {
        if let Some(x) = at {
            res.witnesses.push(LocalizationWitness::JohnFailure {
                x: g.point(x),
                c: worst,
            });
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::grid::discretize;

    #[test]
    fn constants() {
        assert_eq!(lambda_for(1.0), 7.25);
        assert_eq!(c0_for(1.0), 1.0 / 18.0);
        assert_eq!(lambda_for(0.5), 21.25);
        assert!((c0_for(0.5) - 1.0 / 120.0).abs() < 1e-18);
    }

    #[test]
    fn whole_domain_case() {
        let g = discretize(&gallery::disk(64).unwrap().domain, 1.0 / 32.0).unwrap();
        let res = localize(&g, Point::new(0.0, 0.0), 1.9, 1.0).unwrap();
        assert_eq!(res.case, LocalizationCase::WholeDomain);
        assert_eq!(res.lambda, 4.0);
        assert!(res.region.iter().all(|&m| m));
        let res = verify_localization(&g, res, Point::new(0.0, 0.0), 1.9).unwrap();
        assert!(res.sandwich_ok);
    }

    #[test]
    fn disk_center_small_ball() {
        let g = discretize(&gallery::disk(64).unwrap().domain, 1.0 / 64.0).unwrap();
        let x0 = Point::new(0.0, 0.0);
        let res = localize(&g, x0, 0.1, 1.0).unwrap();
        assert_eq!(res.case, LocalizationCase::Constructed);
        assert_eq!(res.lambda, 7.25);
        // region contains B(z0, r)
        for n in g.nodes_within(res.z0, 0.1) {
            assert!(res.region[n as usize]);
        }
        let res = verify_localization(&g, res, x0, 0.1).unwrap();
        assert!(res.sandwich_ok, "{:?}", res.witnesses);
        assert!(res.john_ok, "{:?} {:?}", res.john_constant, res.witnesses);
    }

    #[test]
    fn square_corner_sandwich() {
        let g = discretize(&gallery::square().unwrap().domain, 1.0 / 64.0).unwrap();
        let x0 = Point::new(0.1, 0.1);
        let res = localize(&g, x0, 0.05, 0.25).unwrap();
        let res = verify_localization(&g, res, x0, 0.05).unwrap();
        assert!(res.sandwich_ok, "{:?}", res.witnesses);
    }

    #[test]
    fn truncated_region_fails() {
        let g = discretize(&gallery::disk(64).unwrap().domain, 1.0 / 64.0).unwrap();
        let x0 = Point::new(0.0, 0.0);
        let mut res = localize(&g, x0, 0.1, 1.0).unwrap();
        res.region = g.ball_mask(x0, 0.05);
        let res = verify_localization(&g, res, x0, 0.1).unwrap();
        assert!(!res.sandwich_ok);
        assert!(matches!(res.witnesses[0], LocalizationWitness::NotCovered(_)));
    }

    #[test]
    fn constants_independent_of_ball() {
        let g = discretize(&gallery::square().unwrap().domain, 1.0 / 32.0).unwrap();
        for (x, r) in [((0.5, 0.5), 0.05), ((0.2, 0.7), 0.1), ((0.9, 0.1), 0.02)] {
            let res = localize(&g, Point::new(x.0, x.1), r, 0.5).unwrap();
            if res.case == LocalizationCase::Constructed {
                assert_eq!(res.lambda, 21.25);
            }
            assert_eq!(res.c0, 1.0 / 120.0);
        }
    }

    #[test]
    fn region_distance_is_bounded() {
        let g = discretize(&gallery::square().unwrap().domain, 1.0 / 32.0).unwrap();
        let mask = g.ball_mask(Point::new(0.5, 0.5), 0.25);
        let d = region_boundary_distance(&g, &mask);
        let centre = g.snap(Point::new(0.5, 0.5)).unwrap();
        // oracle: the ball's radius, up to a cell
        assert!((d[centre as usize] - 0.25).abs() <= g.h());
        for n in 0..g.len() {
            assert!(d[n] <= g.dist_field()[n]);
        }
    }

    #[test]
    fn slit_disk_is_not_localized() {
        let g = discretize(&gallery::slit_disk(1.0 / 64.0, 64).unwrap().domain, 1.0 / 128.0).unwrap();
        let x0 = Point::new(0.5, 0.03);
        match localize(&g, x0, 0.1, 1.0) {
            Err(e) => assert!(matches!(e, Error::Localization { .. })),
            Ok(res) => {
                let res = verify_localization(&g, res, x0, 0.1).unwrap();
                assert!(!(res.sandwich_ok && res.john_ok));
                assert!(!res.witnesses.is_empty());
            }
        }
    }
}
