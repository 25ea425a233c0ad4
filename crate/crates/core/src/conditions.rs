//! Sampled estimates of the geometric condition constants.
//!
//! Every constant is an extremum over a deterministic sample with a fixed
//! one-sidedness per kind. Witnesses carry enough data to re-evaluate the
//! extremal sample on its own.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::curve::Curve;
use crate::domain::PolygonalDomain;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{Grid, NodeId};
use crate::metric::{
    geodesic_tree, intrinsic_ball_with, GeodesicTree, GraphRestriction, VisibilityGraph,
};

/// Exponents of the weighted geodesics used as candidate curves.
pub const CANDIDATE_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Pairs closer than this many grid spacings are skipped.
pub const MIN_SEPARATION_CELLS: f64 = 4.0;

/// Rungs `2^0 .. 2^-10` of the LLC(2) ladder.
pub const LLC_LADDER_RUNGS: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionKind {
    Quasiconvex,
    Llc2,
    John,
    Uniform,
    Cigar { alpha: f64, beta: f64 },
    Carrot { alpha: f64 },
    Ahlfors,
    AhlforsIntrinsic,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionKind::Quasiconvex => write!(f, "quasiconvex"),
            ConditionKind::Llc2 => write!(f, "llc2"),
            ConditionKind::John => write!(f, "john"),
            ConditionKind::Uniform => write!(f, "uniform"),
            ConditionKind::Cigar { alpha, beta } => write!(f, "cigar({alpha},{beta})"),
            ConditionKind::Carrot { alpha } => write!(f, "carrot({alpha})"),
            ConditionKind::Ahlfors => write!(f, "ahlfors"),
            ConditionKind::AhlforsIntrinsic => write!(f, "ahlfors_intrinsic"),
        }
    }
}

impl ConditionKind {
    /// One-sidedness of the sampled constant relative to the true one.
    pub fn sidedness(&self) -> Sidedness {
        match self {
            ConditionKind::Ahlfors | ConditionKind::AhlforsIntrinsic | ConditionKind::Llc2 => {
                Sidedness::UpperBoundOfTrue
            }
            _ => Sidedness::LowerBoundOfTrue,
        }
    }

    /// Side of each per-sample value when it is itself a grid minimum.
    pub fn sample_sidedness(&self) -> Option<Sidedness> {
        match self {
            ConditionKind::Cigar { .. } | ConditionKind::Carrot { .. } => {
                Some(Sidedness::UpperBoundOfTrue)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    UpperBoundOfTrue,
    LowerBoundOfTrue,
    TwoSidedWithinTol,
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sidedness::UpperBoundOfTrue => "upper_bound_of_true",
            Sidedness::LowerBoundOfTrue => "lower_bound_of_true",
            Sidedness::TwoSidedWithinTol => "two_sided_within_tol",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    Pair { x: Point, y: Point },
    /// Sampled point `x` joined to the fixed `center`.
    Centered { x: Point, center: Point },
    Ball { center: Point, r: f64 },
    Llc { z: Point, r: f64, b: f64 },
}

impl Witness {
    /// `(x1, y1, x2, y2, r)` with unused slots as NaN.
    pub fn coords(&self) -> [f64; 5] {
        let nan = f64::NAN;
        match *self {
            Witness::Pair { x, y } => [x.x, x.y, y.x, y.y, nan],
            Witness::Centered { x, center } => [x.x, x.y, center.x, center.y, nan],
            Witness::Ball { center, r } => [center.x, center.y, nan, nan, r],
            Witness::Llc { z, r, b } => [z.x, z.y, b, nan, r],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEstimate {
    pub kind: ConditionKind,
    pub constant: f64,
    pub witness: Witness,
    pub sidedness: Sidedness,
    pub sample_sidedness: Option<Sidedness>,
    /// Sampling description plus per-kind notes (winning candidate curve).
    pub params: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    UniformNodes,
    BoundaryBiased,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::UniformNodes => "uniform_nodes",
            Strategy::BoundaryBiased => "boundary_biased",
        })
    }
}

/// Deterministic sampler over grid nodes.
///
/// Pair `k` uses source `k mod n_centers` and is that source's
/// `k / n_centers`-th accepted target, so the pairs for a smaller `n_pairs`
/// are a prefix of those for a larger one.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub seed: u64,
    pub n_pairs: usize,
    pub n_centers: usize,
    /// Radii `2^-k * top` for `k = 0 .. radii_levels`.
    pub radii_levels: usize,
    pub strategy: Strategy,
}

impl Default for Sampler {
    fn default() -> Self {
        Self {
            seed: 0,
            n_pairs: 256,
            n_centers: 16,
            radii_levels: 4,
            strategy: Strategy::BoundaryBiased,
        }
    }
}

const MAX_DRAWS: usize = 1000;

impl Sampler {
    pub fn new(seed: u64, n_pairs: usize, n_centers: usize) -> Self {
        Self {
            seed,
            n_pairs,
            n_centers,
            ..Self::default()
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn describe(&self) -> String {
        format!(
            "seed={};n_pairs={};n_centers={};radii_levels={};strategy={}",
            self.seed, self.n_pairs, self.n_centers, self.radii_levels, self.strategy
        )
    }

    fn near_boundary(g: &Grid) -> Vec<NodeId> {
        let cut = 4.0 * g.h();
        (0..g.len() as NodeId).filter(|&n| g.dist(n) <= cut).collect()
    }

    fn draw_node(&self, g: &Grid, near: &[NodeId], rng: &mut ChaCha8Rng) -> NodeId {
        match self.strategy {
            Strategy::BoundaryBiased if !near.is_empty() && rng.gen_bool(0.5) => {
                near[rng.gen_range(0..near.len())]
            }
            _ => rng.gen_range(0..g.len()) as NodeId,
        }
    }

    /// First `n` sampled nodes of the point stream.
    pub fn points(&self, g: &Grid, n: usize) -> Vec<NodeId> {
        let near = Self::near_boundary(g);
        let mut rng = self.rng(0);
        (0..n).map(|_| self.draw_node(g, &near, &mut rng)).collect()
    }

    /// Source nodes, one per center.
    pub fn sources(&self, g: &Grid) -> Vec<NodeId> {
        self.points(g, self.n_centers)
    }

    /// Sampled pairs `(source, target)` in pair order; targets are at least
    /// `4h` from their source and in the same grid component.
    pub fn pairs(&self, g: &Grid) -> Vec<(NodeId, NodeId)> {
        if self.n_centers == 0 {
            return Vec::new();
        }
        let sources = self.sources(g);
        let per: Vec<usize> = (0..self.n_centers)
            .map(|i| (self.n_pairs + self.n_centers - 1 - i) / self.n_centers)
            .collect();
        let targets: Vec<Vec<NodeId>> = sources
            .iter()
            .enumerate()
            .map(|(i, &src)| self.targets(g, src, i as u64 + 1, per[i]))
            .collect();
        let mut out = Vec::with_capacity(self.n_pairs);
        for k in 0..self.n_pairs {
            let i = k % self.n_centers;
            if let Some(&t) = targets[i].get(k / self.n_centers) {
                out.push((sources[i], t));
            }
        }
        out
    }

    fn targets(&self, g: &Grid, src: NodeId, stream: u64, count: usize) -> Vec<NodeId> {
        let mut rng = self.rng(stream);
        let min_sep = MIN_SEPARATION_CELLS * g.h();
        let diam = g.domain().diameter();
        let p = g.point(src);
        let mut out = Vec::with_capacity(count);
        let mut draws = 0;
        while out.len() < count && draws < MAX_DRAWS * count.max(1) {
            draws += 1;
            let cand = match self.strategy {
                Strategy::UniformNodes => rng.gen_range(0..g.len()) as NodeId,
                Strategy::BoundaryBiased => {
                    let t: f64 = rng.gen();
                    let rho = min_sep * (diam / min_sep).max(1.0).powf(t);
                    let th = rng.gen_range(0.0..std::f64::consts::TAU);
                    match g.snap(p + Point::new(rho * th.cos(), rho * th.sin())) {
                        Ok(n) => n,
                        Err(_) => continue,
                    }
                }
            };
            if g.point(cand).dist(p) >= min_sep && g.component(cand) == g.component(src) {
                out.push(cand);
            }
        }
        out
    }

    pub fn radii(&self, top: f64) -> Vec<f64> {
        (0..self.radii_levels).map(|k| top * 0.5f64.powi(k as i32)).collect()
    }
}

/// Which candidate curve realized a per-pair value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Candidate {
    Euclidean,
    Weighted(f64),
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Euclidean => write!(f, "euclidean"),
            Candidate::Weighted(a) => write!(f, "alpha={a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    /// Arclength from the curve start.
    pub s: f64,
    pub p: Point,
    pub dist: f64,
}

/// Samples of `curve` at spacing at most `step`, with exact boundary
/// distances.
pub fn sample_curve(d: &PolygonalDomain, curve: &Curve, step: f64) -> Vec<CurveSample> {
    curve
        .samples(step)
        .into_iter()
        .map(|(s, p)| CurveSample {
            s,
            p,
            dist: d.boundary_distance_unchecked(p),
        })
        .collect()
}

/// Uniformity parameter of one curve joining `x` and `y`, capped at 1.
/// Samples at the endpoints impose no constraint.
pub fn uniform_eps(samples: &[CurveSample], x: Point, y: Point, length: f64) -> f64 {
    let dxy = x.dist(y);
    if dxy == 0.0 {
        return 1.0;
    }
    let mut e = if length > 0.0 { dxy / length } else { 1.0 };
    for z in samples {
        let (a, b) = (x.dist(z.p), y.dist(z.p));
        if a == 0.0 || b == 0.0 {
            continue;
        }
        e = e.min(z.dist * dxy / (a * b));
    }
    e.min(1.0)
}

/// John parameter `min_t dist(γ(t)) / t` of a curve starting at the sampled
/// point, capped at 1.
pub fn john_c(samples: &[CurveSample]) -> f64 {
    samples
        .iter()
        .filter(|z| z.s > 0.0)
        .map(|z| z.dist / z.s)
        .fold(1.0, f64::min)
}

/// Weighted trees for every candidate exponent rooted at `root`.
pub fn candidate_trees(
    g: &Grid,
    root: NodeId,
    restrict: GraphRestriction<'_>,
) -> Result<Vec<GeodesicTree>> {
    CANDIDATE_ALPHAS
        .par_iter()
        .map(|&a| geodesic_tree(g, root, a, restrict, None))
        .collect()
}

/// Candidate curves from the trees' root to `target`, plus the Euclidean
/// geodesic when `vis` is given.
pub fn candidate_curves(
    g: &Grid,
    vis: Option<&VisibilityGraph>,
    trees: &[GeodesicTree],
    target: NodeId,
) -> Result<Vec<(Candidate, Curve)>> {
    let mut out = Vec::with_capacity(trees.len() + 1);
    if let (Some(vis), Some(root)) = (vis, trees.first()) {
        if let Some(c) = vis.shortest_path(g.point(root.source()), g.point(target))? {
            out.push((Candidate::Euclidean, c));
        }
    }
    for t in trees {
        if t.reached(target) {
            out.push((Candidate::Weighted(t.alpha()), t.path(g, target)));
        }
    }
    Ok(out)
}

/// Best uniformity parameter over the candidate family for the pair
/// `(root, target)`, with the winning curve (root to target).
pub fn best_uniform_curve(
    g: &Grid,
    vis: Option<&VisibilityGraph>,
    trees: &[GeodesicTree],
    target: NodeId,
    dist: Option<&[f64]>,
) -> Result<Option<(f64, Candidate, Curve)>> {
    let root = trees
        .first()
        .map(|t| t.source())
        .ok_or_else(|| Error::InvalidParameter("no candidate trees".into()))?;
    let (x, y) = (g.point(root), g.point(target));
    let mut best: Option<(f64, Candidate, Curve)> = None;
    for (cand, curve) in candidate_curves(g, vis, trees, target)? {
        let samples = match (dist, cand) {
            (Some(field), Candidate::Weighted(_)) => node_samples(g, trees, cand, target, field),
            _ => sample_curve(g.domain(), &curve, g.h()),
        };
        let e = uniform_eps(&samples, x, y, curve.length());
        if best.as_ref().map_or(true, |b| e > b.0) {
            best = Some((e, cand, curve));
        }
    }
    Ok(best)
}

// samples at the path nodes, with a caller-supplied per-node distance field
fn node_samples(
    g: &Grid,
    trees: &[GeodesicTree],
    cand: Candidate,
    target: NodeId,
    field: &[f64],
) -> Vec<CurveSample> {
    let Candidate::Weighted(a) = cand else {
        return Vec::new();
    };
    let tree = trees.iter().find(|t| t.alpha() == a).expect("tree for alpha");
    let mut s = 0.0;
    let mut prev: Option<Point> = None;
    tree.node_path(target)
        .into_iter()
        .map(|n| {
            let p = g.point(n);
            if let Some(q) = prev {
                s += q.dist(p);
            }
            prev = Some(p);
            CurveSample {
                s,
                p,
                dist: field[n as usize],
            }
        })
        .collect()
}

/// Best John parameter over the candidate family for the curve from `x` to
/// the trees' root. `dist` overrides the boundary distance per node and
/// restricts sampling to path nodes.
pub fn best_john_curve(
    g: &Grid,
    vis: Option<&VisibilityGraph>,
    trees: &[GeodesicTree],
    x: NodeId,
    dist: Option<&[f64]>,
) -> Result<Option<(f64, Candidate)>> {
    let root = trees
        .first()
        .map(|t| t.source())
        .ok_or_else(|| Error::InvalidParameter("no candidate trees".into()))?;
    if root == x {
        return Ok(Some((1.0, Candidate::Euclidean)));
    }
    let mut best: Option<(f64, Candidate)> = None;
    for (cand, curve) in candidate_curves(g, vis, trees, x)? {
        let mut samples = match (dist, cand) {
            (Some(field), Candidate::Weighted(_)) => node_samples(g, trees, cand, x, field),
            _ => sample_curve(g.domain(), &curve, g.h()),
        };
        // measure arclength from x rather than from the root
        let total = curve.length();
        for z in samples.iter_mut() {
            z.s = total - z.s;
        }
        let c = john_c(&samples);
        if best.map_or(true, |b| c > b.0) {
            best = Some((c, cand));
        }
    }
    Ok(best)
}

fn require_connected(g: &Grid) -> Result<()> {
    if g.is_connected() {
        Ok(())
    } else {
        Err(Error::Disconnected(format!(
            "grid has {} components at h = {}",
            g.component_count(),
            g.h()
        )))
    }
}

fn group_pairs(pairs: &[(NodeId, NodeId)]) -> Vec<(NodeId, Vec<(usize, NodeId)>)> {
    let mut groups: Vec<(NodeId, Vec<(usize, NodeId)>)> = Vec::new();
    for (k, &(s, t)) in pairs.iter().enumerate() {
        match groups.iter_mut().find(|(src, _)| *src == s) {
            Some((_, v)) => v.push((k, t)),
            None => groups.push((s, vec![(k, t)])),
        }
    }
    groups
}

/// Per-sample values in sample order; pick the extremum, first index on ties.
fn extremum<T: Clone>(values: &[(f64, T)], max: bool) -> Option<(f64, T)> {
    let mut best: Option<&(f64, T)> = None;
    for v in values {
        let better = match best {
            None => true,
            Some(b) => {
                if max {
                    v.0 > b.0
                } else {
                    v.0 < b.0
                }
            }
        };
        if better {
            best = Some(v);
        }
    }
    best.cloned()
}

fn no_samples(what: &str) -> Error {
    Error::Degenerate(format!("no admissible samples for {what}"))
}

/// Max over sampled pairs of `d_Ω(x, y) / |x - y|`.
pub fn quasiconvexity_constant(g: &Grid, s: &Sampler) -> Result<ConditionEstimate> {
    require_connected(g)?;
    let vis = VisibilityGraph::new(g.domain());
    let pairs = s.pairs(g);
    let groups = group_pairs(&pairs);
    let mut vals: Vec<(usize, f64, Witness)> = groups
        .par_iter()
        .flat_map_iter(|(src, tgts)| {
            let x = g.point(*src);
            let pts: Vec<Point> = tgts.iter().map(|&(_, t)| g.point(t)).collect();
            let d = vis.distances_from(x, &pts);
            tgts.iter()
                .zip(d)
                .zip(pts)
                .map(move |((&(k, _), dist), y)| (k, dist / x.dist(y), Witness::Pair { x, y }))
                .collect::<Vec<_>>()
        })
        .collect();
    vals.sort_by_key(|v| v.0);
    let vals: Vec<(f64, Witness)> = vals.into_iter().map(|v| (v.1, v.2)).collect();
    let (constant, witness) = extremum(&vals, true).ok_or_else(|| no_samples("quasiconvexity"))?;
    let kind = ConditionKind::Quasiconvex;
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: kind.sample_sidedness(),
        params: s.describe(),
    })
}

/// Largest `b` on the ladder `1, 1/2, ..., 2^-10` such that all nodes of
/// `Ω \ B(z, r)` lie in one component of the grid restricted to
/// `Ω \ B(z, b r)`; `0` when no rung works.
pub fn llc2_critical_b(g: &Grid, z: Point, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let outside: Vec<NodeId> = (0..g.len() as NodeId)
        .filter(|&n| g.point(n).dist(z) >= r)
        .collect();
    if outside.len() < 2 {
        return Err(Error::Degenerate(format!(
            "fewer than two nodes outside B(({}, {}), {r})",
            z.x, z.y
        )));
    }
    for k in 0..=LLC_LADDER_RUNGS {
        let b = 0.5f64.powi(k);
        let (labels, _) = g.label_components(|n| g.point(n).dist(z) >= b * r);
        let first = labels[outside[0] as usize];
        if outside.iter().all(|&n| labels[n as usize] == first) {
            return Ok(b);
        }
    }
    Ok(0.0)
}

/// Min over sampled `(z, r)` of the critical LLC(2) rung, with `z` at
/// sampled nodes and `r = 2^-k diam`, `k >= 1`.
pub fn llc2_estimate(g: &Grid, s: &Sampler) -> Result<ConditionEstimate> {
    let centers = s.sources(g);
    let radii: Vec<f64> = s
        .radii(g.domain().diameter())
        .into_iter()
        .map(|r| r / 2.0)
        .collect();
    let cells: Vec<(Point, f64)> = centers
        .iter()
        .flat_map(|&c| radii.iter().map(move |&r| (c, r)))
        .map(|(c, r)| (g.point(c), r))
        .collect();
    let vals: Vec<Option<(f64, Witness)>> = cells
        .par_iter()
        .map(|&(z, r)| match llc2_critical_b(g, z, r) {
            Ok(b) => Ok(Some((b, Witness::Llc { z, r, b }))),
            Err(Error::Degenerate(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let vals: Vec<(f64, Witness)> = vals.into_iter().flatten().collect();
    let (constant, witness) = extremum(&vals, false).ok_or_else(|| no_samples("llc2"))?;
    let kind = ConditionKind::Llc2;
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: None,
        params: s.describe(),
    })
}

fn check_cigar(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta <= alpha) {
        return Err(Error::InvalidParameter(format!(
            "cigar needs 0 < beta <= alpha < 1, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(())
}

/// Max over sampled pairs of `∫_γ dist^(α-1) / |x - y|^β` with `γ` the grid
/// geodesic.
pub fn cigar_constant(g: &Grid, alpha: f64, beta: f64, s: &Sampler) -> Result<ConditionEstimate> {
    check_cigar(alpha, beta)?;
    let pairs = s.pairs(g);
    let groups = group_pairs(&pairs);
    let mut vals: Vec<(usize, f64, Witness)> = groups
        .par_iter()
        .map(|(src, tgts)| {
            let tree = geodesic_tree(g, *src, alpha, GraphRestriction::default(), None)?;
            let x = g.point(*src);
            tgts.iter()
                .map(|&(k, t)| {
                    if !tree.reached(t) {
                        return Err(Error::Disconnected(format!(
                            "no weighted path from ({}, {}) to ({}, {})",
                            x.x,
                            x.y,
                            g.point(t).x,
                            g.point(t).y
                        )));
                    }
                    let y = g.point(t);
                    Ok((k, tree.value(t) / x.dist(y).powf(beta), Witness::Pair { x, y }))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    vals.sort_by_key(|v| v.0);
    let vals: Vec<(f64, Witness)> = vals.into_iter().map(|v| (v.1, v.2)).collect();
    let (constant, witness) = extremum(&vals, true).ok_or_else(|| no_samples("cigar"))?;
    let kind = ConditionKind::Cigar { alpha, beta };
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: kind.sample_sidedness(),
        params: s.describe(),
    })
}

/// Per-pair cigar ratio for explicit points.
pub fn cigar_ratio(g: &Grid, x: Point, y: Point, alpha: f64, beta: f64) -> Result<f64> {
    check_cigar(alpha, beta)?;
    let r = crate::metric::weighted_geodesic(g, x, y, alpha)?;
    let (a, b) = r.endpoints;
    Ok(r.value / a.dist(b).powf(beta))
}

fn carrot_value(g: &Grid, alpha: f64, value: f64, x: NodeId) -> f64 {
    if alpha > 0.0 {
        value
    } else {
        let c1 = g.domain().diameter();
        value / (1.0 + (c1 / g.dist(x)).ln())
    }
}

/// Carrot constant with center `x0`: max over sampled `x` of the weighted
/// integral (α > 0) or of the quasihyperbolic value over
/// `1 + log(diam / dist(x))` (α = 0).
pub fn carrot_constant(g: &Grid, alpha: f64, x0: Point, s: &Sampler) -> Result<ConditionEstimate> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("carrot needs 0 <= alpha < 1, got {alpha}")));
    }
    let root = g.snap(x0)?;
    let c = g.point(root);
    let tree = geodesic_tree(g, root, alpha, GraphRestriction::default(), None)?;
    let mut vals = Vec::new();
    for x in s.points(g, s.n_pairs) {
        if !tree.reached(x) {
            let p = g.point(x);
            return Err(Error::Disconnected(format!(
                "({}, {}) is not joined to the center",
                p.x, p.y
            )));
        }
        vals.push((
            carrot_value(g, alpha, tree.value(x), x),
            Witness::Centered {
                x: g.point(x),
                center: c,
            },
        ));
    }
    let (constant, witness) = extremum(&vals, true).ok_or_else(|| no_samples("carrot"))?;
    let kind = ConditionKind::Carrot { alpha };
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: kind.sample_sidedness(),
        params: s.describe(),
    })
}

/// Per-pair uniformity parameter: best candidate for `(x, y)`.
pub fn uniform_pair(
    g: &Grid,
    vis: &VisibilityGraph,
    x: NodeId,
    y: NodeId,
) -> Result<(f64, Candidate)> {
    let trees = candidate_trees(g, x, GraphRestriction::default())?;
    best_uniform_curve(g, Some(vis), &trees, y, None)?
        .map(|(e, c, _)| (e, c))
        .ok_or_else(|| Error::Disconnected("no candidate curve joins the pair".into()))
}

/// Min over sampled pairs of the best candidate uniformity parameter.
pub fn uniformity_estimate(g: &Grid, s: &Sampler) -> Result<ConditionEstimate> {
    require_connected(g)?;
    let vis = VisibilityGraph::new(g.domain());
    let pairs = s.pairs(g);
    let groups = group_pairs(&pairs);
    let mut vals: Vec<(usize, f64, (Witness, Candidate))> = groups
        .par_iter()
        .map(|(src, tgts)| {
            let trees = candidate_trees(g, *src, GraphRestriction::default())?;
            tgts.iter()
                .map(|&(k, t)| {
                    let (e, cand, _) = best_uniform_curve(g, Some(&vis), &trees, t, None)?
                        .ok_or_else(|| Error::Disconnected("no candidate curve".into()))?;
                    let w = Witness::Pair {
                        x: g.point(*src),
                        y: g.point(t),
                    };
                    Ok((k, e, (w, cand)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    vals.sort_by_key(|v| v.0);
    let vals: Vec<(f64, (Witness, Candidate))> = vals.into_iter().map(|v| (v.1, v.2)).collect();
    let (constant, (witness, cand)) =
        extremum(&vals, false).ok_or_else(|| no_samples("uniformity"))?;
    let kind = ConditionKind::Uniform;
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: None,
        params: format!("{};best_curve={cand}", s.describe()),
    })
}

/// Min over sampled `x` of the best candidate John parameter towards `x0`.
pub fn john_estimate(g: &Grid, x0: Point, s: &Sampler) -> Result<ConditionEstimate> {
    let root = g.snap(x0)?;
    let c = g.point(root);
    let vis = VisibilityGraph::new(g.domain());
    let trees = candidate_trees(g, root, GraphRestriction::default())?;
    let min_sep = MIN_SEPARATION_CELLS * g.h();
    let xs: Vec<NodeId> = s
        .points(g, s.n_pairs)
        .into_iter()
        .filter(|&x| g.point(x).dist(c) >= min_sep || x == root)
        .collect();
    let vals: Vec<(f64, (Witness, Candidate))> = xs
        .par_iter()
        .map(|&x| {
            let (v, cand) = best_john_curve(g, Some(&vis), &trees, x, None)?.ok_or_else(|| {
                let p = g.point(x);
                Error::Disconnected(format!("({}, {}) is not joined to the center", p.x, p.y))
            })?;
            Ok((
                v,
                (
                    Witness::Centered {
                        x: g.point(x),
                        center: c,
                    },
                    cand,
                ),
            ))
        })
        .collect::<Result<_>>()?;
    let (constant, (witness, cand)) = extremum(&vals, false).ok_or_else(|| no_samples("john"))?;
    let kind = ConditionKind::John;
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: None,
        params: format!("{};best_curve={cand}", s.describe()),
    })
}

/// `r_o = min(1, sqrt(|Ω| / 2π))`.
pub fn ahlfors_top_radius(d: &PolygonalDomain) -> f64 {
    (d.area() / (2.0 * PI)).sqrt().min(1.0)
}

/// Ball measure ratio `|B ∩ Ω| / (π r²)` at one center.
pub fn ahlfors_ratio(
    g: &Grid,
    vis: Option<&VisibilityGraph>,
    center: Point,
    r: f64,
) -> Result<f64> {
    let measure = match vis {
        Some(v) => intrinsic_ball_with(g, v, center, r)?.measure,
        None => g.nodes_within(g.point(g.snap(center)?), r).len() as f64 * g.cell_area(),
    };
    Ok(measure / (PI * r * r))
}

/// Min of the ball measure ratio over explicit centers and radii.
pub fn ahlfors_at(
    g: &Grid,
    intrinsic: bool,
    centers: &[Point],
    radii: &[f64],
    params: String,
) -> Result<ConditionEstimate> {
    let vis = intrinsic.then(|| VisibilityGraph::new(g.domain()));
    let cells: Vec<(Point, f64)> = centers
        .iter()
        .flat_map(|&c| radii.iter().map(move |&r| (c, r)))
        .collect();
    let vals: Vec<(f64, Witness)> = cells
        .par_iter()
        .map(|&(c, r)| {
            let center = g.point(g.snap(c)?);
            Ok((ahlfors_ratio(g, vis.as_ref(), center, r)?, Witness::Ball { center, r }))
        })
        .collect::<Result<_>>()?;
    let (constant, witness) = extremum(&vals, false)
        .ok_or_else(|| Error::InvalidParameter("empty radius ladder".into()))?;
    let kind = if intrinsic {
        ConditionKind::AhlforsIntrinsic
    } else {
        ConditionKind::Ahlfors
    };
    Ok(ConditionEstimate {
        kind,
        constant,
        witness,
        sidedness: kind.sidedness(),
        sample_sidedness: None,
        params,
    })
}

/// Radii `r_o 2^-k` that are at least `4h`.
pub fn ahlfors_radii(g: &Grid, levels: usize) -> Vec<f64> {
    let top = ahlfors_top_radius(g.domain());
    (0..levels)
        .map(|k| top * 0.5f64.powi(k as i32))
        .filter(|&r| r >= MIN_SEPARATION_CELLS * g.h())
        .collect()
}

pub fn ahlfors_constant(g: &Grid, intrinsic: bool, s: &Sampler) -> Result<ConditionEstimate> {
    let radii = ahlfors_radii(g, s.radii_levels);
    if radii.is_empty() {
        return Err(Error::InvalidParameter(
            "empty radius ladder: r_o is below 4h".into(),
        ));
    }
    let centers: Vec<Point> = s.sources(g).into_iter().map(|n| g.point(n)).collect();
    ahlfors_at(g, intrinsic, &centers, &radii, s.describe())
}

impl ConditionEstimate {
    /// Recomputes the value at the witness alone.
    pub fn reevaluate(&self, g: &Grid) -> Result<f64> {
        match (self.kind, self.witness) {
            (ConditionKind::Quasiconvex, Witness::Pair { x, y }) => {
                Ok(VisibilityGraph::new(g.domain()).distance(x, y)? / x.dist(y))
            }
            (ConditionKind::Uniform, Witness::Pair { x, y }) => {
                let vis = VisibilityGraph::new(g.domain());
                Ok(uniform_pair(g, &vis, g.snap(x)?, g.snap(y)?)?.0)
            }
            (ConditionKind::Cigar { alpha, beta }, Witness::Pair { x, y }) => {
                cigar_ratio(g, x, y, alpha, beta)
            }
            (ConditionKind::Carrot { alpha }, Witness::Centered { x, center }) => {
                let root = g.snap(center)?;
                let n = g.snap(x)?;
                let tree = geodesic_tree(g, root, alpha, GraphRestriction::default(), Some(n))?;
                Ok(carrot_value(g, alpha, tree.value(n), n))
            }
            (ConditionKind::John, Witness::Centered { x, center }) => {
                let vis = VisibilityGraph::new(g.domain());
                let trees = candidate_trees(g, g.snap(center)?, GraphRestriction::default())?;
                Ok(best_john_curve(g, Some(&vis), &trees, g.snap(x)?, None)?
                    .map_or(0.0, |v| v.0))
            }
            (ConditionKind::Ahlfors, Witness::Ball { center, r }) => ahlfors_ratio(g, None, center, r),
            (ConditionKind::AhlforsIntrinsic, Witness::Ball { center, r }) => {
                let vis = VisibilityGraph::new(g.domain());
                ahlfors_ratio(g, Some(&vis), center, r)
            }
            (ConditionKind::Llc2, Witness::Llc { z, r, .. }) => llc2_critical_b(g, z, r),
            (k, w) => Err(Error::InvalidParameter(format!(
                "witness {w:?} does not fit kind {k}"
            ))),
        }
    }
}
