//! Discrete calculus on grids and numeric evaluation of local
//! Sobolev–Poincaré, Trudinger and Morrey inequalities, Poincaré quotients,
//! Neumann eigenvalue estimates and p-capacities.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conditions::Sampler;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::{Grid, NodeId, NONE};
use crate::metric::VisibilityGraph;

/// Default inner constant of the exponential integrability functional.
pub const DEFAULT_A: f64 = 1.0;
/// Default ball dilation.
pub const DEFAULT_LAMBDA: f64 = 2.0;
/// Eigen solve: relative tolerance on the Rayleigh quotient.
pub const EIGEN_TOL: f64 = 1e-8;
pub const EIGEN_MAX_ITER: usize = 10_000;
/// Block size of the eigen iteration.
const EIGEN_BLOCK: usize = 3;
/// Relative tolerance of the p ≠ 2 capacity descent.
pub const CAPACITY_TOL: f64 = 1e-6;
const CAPACITY_MAX_ITER: usize = 50_000;
const CG_TOL: f64 = 1e-11;
/// Balls with at most this many nodes get an exhaustive pair search.
const EXHAUSTIVE_PAIRS: usize = 2048;
const EXTREME_NODES: usize = 64;

/// Real values on every node of a grid.
#[derive(Debug, Clone)]
pub struct DiscreteFunction<'g> {
    grid: &'g Grid,
    values: Vec<f64>,
}

impl<'g> DiscreteFunction<'g> {
    pub fn new(grid: &'g Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("value at node {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &'g Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().iter().map(|&p| f(p)).collect())
    }

    pub fn constant(grid: &'g Grid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, n: NodeId) -> f64 {
        self.values[n as usize]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// Forward-difference gradient, one-sided where a neighbour is missing.
    pub fn gradient(&self, n: NodeId) -> [f64; 2] {
        let h = self.grid.h();
        let mut g = [0.0; 2];
        for (axis, gi) in g.iter_mut().enumerate() {
            if let Some((m, s)) = self.grid.gradient_stencil(n, axis) {
                *gi = s * (self.values[m as usize] - self.values[n as usize]) / h;
            }
        }
        g
    }

    pub fn gradient_norm(&self, n: NodeId) -> f64 {
        let [a, b] = self.gradient(n);
        a.hypot(b)
    }

    fn is_constant_on(&self, nodes: &[NodeId]) -> bool {
        match nodes.first() {
            None => true,
            Some(&first) => {
                let v = self.value(first);
                nodes.iter().all(|&n| self.value(n) == v)
            }
        }
    }
}

/// `(Σ_region |∇u|^p h²)^{1/p}`.
pub fn p_dirichlet_energy(u: &DiscreteFunction<'_>, region: &[NodeId], p: f64) -> f64 {
    let area = u.grid.cell_area();
    let sum: f64 = region
        .iter()
        .map(|&n| u.gradient_norm(n).powf(p) * area)
        .sum();
    sum.powf(1.0 / p)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent must be >= 1, got {p}")))
    }
}

fn check_ball(r: f64, lambda: f64) -> Result<()> {
    if !(r > 0.0) || !(lambda >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need r > 0 and lambda >= 1, got r = {r}, lambda = {lambda}"
        )));
    }
    Ok(())
}

fn nonempty_ball(g: &Grid, x0: Point, r: f64) -> Result<Vec<NodeId>> {
    let nodes = g.nodes_within(x0, r);
    if nodes.is_empty() {
        Err(Error::Degenerate(format!(
            "no grid node within {r} of ({}, {})",
            x0.x, x0.y
        )))
    } else {
        Ok(nodes)
    }
}

/// Minimizer and minimum of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    if !(b > a) {
        return (a, f(a));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // the endpoints can win for monotone objectives
    [(a, f(a)), (b, f(b)), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nonempty")
}

fn value_range(u: &DiscreteFunction<'_>, nodes: &[NodeId]) -> (f64, f64) {
    nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &n| {
        let v = u.value(n);
        (lo.min(v), hi.max(v))
    })
}

/// `inf_c (Σ_nodes |u - c|^q h²)^{1/q}`.
pub fn lq_deviation(u: &DiscreteFunction<'_>, nodes: &[NodeId], q: f64) -> f64 {
    let area = u.grid.cell_area();
    let (lo, hi) = value_range(u, nodes);
    let norm = |c: f64| {
        nodes
            .iter()
            .map(|&n| (u.value(n) - c).abs().powf(q) * area)
            .sum::<f64>()
            .powf(1.0 / q)
    };
    golden_section(norm, lo, hi).1
}

/// Quotient of the left side of the local inequality by the gradient norm
/// over `B(x0, λr)`: a lower bound for the best constant.
///
/// For `p < 2` the left side is the `L^q` deviation with `q = 2p/(2-p)`;
/// `p = 2` uses [`trudinger_functional`] with `A = 1`; `p > 2` uses
/// [`morrey_quotient`] with the default sampler.
pub fn local_sp_functional(
    u: &DiscreteFunction<'_>,
    p: f64,
    x0: Point,
    r: f64,
    lambda: f64,
) -> Result<f64> {
    check_p(p)?;
    check_ball(r, lambda)?;
    if p == 2.0 {
        return trudinger_functional(u, x0, r, lambda, DEFAULT_A);
    }
    if p > 2.0 {
        return morrey_quotient(u, p, x0, r, lambda, &Sampler::default());
    }
    let g = u.grid;
    let inner = nonempty_ball(g, x0, r)?;
    let energy = p_dirichlet_energy(u, &g.nodes_within(x0, lambda * r), p);
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let q = 2.0 * p / (2.0 - p);
    Ok(lq_deviation(u, &inner, q) / energy)
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Natural log of the exponential integrability functional
/// `inf_c Σ_{B(x0,r)} exp((A|u - c| / ‖∇u‖_{L²(B(x0,λr))})²) h² / (π r²)`.
///
/// A function with zero gradient that is constant on the ball gives
/// `|B ∩ Ω| / |B|`; otherwise zero gradient is an error.
pub fn trudinger_log_functional(
    u: &DiscreteFunction<'_>,
    x0: Point,
    r: f64,
    lambda: f64,
    a: f64,
) -> Result<f64> {
    check_ball(r, lambda)?;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("A must be positive, got {a}")));
    }
    let g = u.grid;
    let inner = nonempty_ball(g, x0, r)?;
    let log_norm = g.cell_area().ln() - (std::f64::consts::PI * r * r).ln();
    let energy = p_dirichlet_energy(u, &g.nodes_within(x0, lambda * r), 2.0);
    if energy == 0.0 {
        if u.is_constant_on(&inner) {
            return Ok((inner.len() as f64).ln() + log_norm);
        }
        return Err(Error::ZeroEnergy);
    }
    let (lo, hi) = value_range(u, &inner);
    let objective = |c: f64| {
        log_sum_exp(inner.iter().map(|&n| (a * (u.value(n) - c).abs() / energy).powi(2)))
    };
    Ok(golden_section(objective, lo, hi).1 + log_norm)
}

pub fn trudinger_functional(
    u: &DiscreteFunction<'_>,
    x0: Point,
    r: f64,
    lambda: f64,
    a: f64,
) -> Result<f64> {
    trudinger_log_functional(u, x0, r, lambda, a).map(f64::exp)
}

/// `inf{s > 0 : Σ_region φ(|f|/s) h² ≤ 1}` with `φ(t) = exp(t²) - 1`.
pub fn orlicz_norm(f: &DiscreteFunction<'_>, region: &[NodeId]) -> f64 {
    let m = region.iter().map(|&n| f.value(n).abs()).fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let area = f.grid.cell_area();
    // work with f / max|f| so the result is exactly homogeneous up to rounding
    let normalized: Vec<f64> = region.iter().map(|&n| f.value(n).abs() / m).collect();
    let modular = |s: f64| -> f64 {
        normalized
            .iter()
            .map(|&v| (v / s).powi(2).exp_m1() * area)
            .sum()
    };
    let mut hi = 1.0;
    while modular(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if modular(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi * m
}

/// `clamp((b_prev r - d_Ω(y, x)) / (b_prev r - b_next r), 0, 1)` using the
/// exact intrinsic distance field.
pub fn annulus_test_function<'g>(
    g: &'g Grid,
    x: Point,
    r: f64,
    b_prev: f64,
    b_next: f64,
) -> Result<DiscreteFunction<'g>> {
    let vis = VisibilityGraph::new(g.domain());
    annulus_test_function_with(g, &vis, x, r, b_prev, b_next)
}

pub fn annulus_test_function_with<'g>(
    g: &'g Grid,
    vis: &VisibilityGraph,
    x: Point,
    r: f64,
    b_prev: f64,
    b_next: f64,
) -> Result<DiscreteFunction<'g>> {
    if !(0.0 < b_next && b_next < b_prev && b_prev <= 1.0) || !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < b_next < b_prev <= 1 and r > 0, got b_prev = {b_prev}, b_next = {b_next}, r = {r}"
        )));
    }
    let c = g.point(g.snap(x)?);
    let d = vis.distance_field(g, c);
    let (outer, inner) = (b_prev * r, b_next * r);
    DiscreteFunction::new(
        g,
        d.iter()
            .map(|&t| ((outer - t) / (outer - inner)).clamp(0.0, 1.0))
            .collect(),
    )
}

/// One rung of the measure-halving ladder of intrinsic balls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingStep {
    pub b: f64,
    /// Achieved `|B_Ω(x, b_j r)| / |B_Ω(x, b_{j-1} r)|`.
    pub ratio: f64,
}

/// Radii `b_1 > b_2 > …` with `|B_Ω(x, b_j r)| ≈ |B_Ω(x, b_{j-1} r)| / 2`,
/// starting from `b_0 = 1`. Each `b_j` is the smallest radius whose discrete
/// ball holds half the previous count.
pub fn halving_ladder(g: &Grid, x: Point, r: f64, levels: usize) -> Result<Vec<HalvingStep>> {
    let vis = VisibilityGraph::new(g.domain());
    let c = g.point(g.snap(x)?);
    let mut d: Vec<f64> = vis
        .distance_field(g, c)
        .into_iter()
        .filter(|t| t.is_finite())
        .collect();
    d.sort_by(f64::total_cmp);
    let mut count = d.partition_point(|&t| t < r);
    let mut out = Vec::new();
    for _ in 0..levels {
        let target = count / 2;
        if target == 0 {
            break;
        }
        // open ball of radius d[target] holds exactly the nodes before it
        let b = d[target] / r;
        let held = d.partition_point(|&t| t < d[target]);
        out.push(HalvingStep {
            b,
            ratio: held as f64 / count as f64,
        });
        count = held;
    }
    Ok(out)
}

/// Log test function: on the component `Ω₂` of `Ω \ B(x0, br)` containing
/// `seed`, `log(|x - x0| / br) / log(1/2b)` inside `B(x0, r/2)` and 1
/// outside it; 0 elsewhere.
///
/// With `window = Some(ρ)` components are taken inside `B(x0, 2ρ)` only and
/// the function is cut off linearly between `ρ` and `2ρ`, which keeps it
/// Lipschitz while isolating the local geometry.
pub fn log_test_function<'g>(
    g: &'g Grid,
    x0: Point,
    r: f64,
    b: f64,
    seed: Point,
    window: Option<f64>,
) -> Result<DiscreteFunction<'g>> {
    if !(b > 0.0 && b < 0.5) || !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < b < 1/2 and r > 0, got b = {b}, r = {r}"
        )));
    }
    if let Some(w) = window {
        if !(w >= r / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "window {w} must be at least r/2 = {}",
                r / 2.0
            )));
        }
    }
    let inner = b * r;
    if seed.dist(x0) < inner {
        return Err(Error::InvalidParameter(format!(
            "seed ({}, {}) lies inside B(x0, br)",
            seed.x, seed.y
        )));
    }
    let allowed = |n: NodeId| {
        let t = g.point(n).dist(x0);
        t >= inner && window.map_or(true, |w| t < 2.0 * w)
    };
    let s = g.snap(seed)?;
    if !allowed(s) {
        return Err(Error::InvalidParameter(format!(
            "seed ({}, {}) snaps inside B(x0, br)",
            seed.x, seed.y
        )));
    }
    let (labels, _) = g.label_components(allowed);
    let target = labels[s as usize];
    let scale = (1.0 / (2.0 * b)).ln();
    let values = (0..g.len() as NodeId)
        .map(|n| {
            if labels[n as usize] != target {
                return 0.0;
            }
            let t = g.point(n).dist(x0);
            let base = if t >= r / 2.0 {
                1.0
            } else {
                (t / inner).ln() / scale
            };
            let cut = window.map_or(1.0, |w| ((2.0 * w - t) / w).clamp(0.0, 1.0));
            base * cut
        })
        .collect();
    DiscreteFunction::new(g, values)
}

/// Mean absolute deviation over `B(x0, r)` divided by `r` times the p-mean
/// of `|∇u|` over `B(x0, λr)`.
pub fn poincare_quotient(
    u: &DiscreteFunction<'_>,
    p: f64,
    x0: Point,
    r: f64,
    lambda: f64,
) -> Result<f64> {
    check_p(p)?;
    check_ball(r, lambda)?;
    let g = u.grid;
    let inner = nonempty_ball(g, x0, r)?;
    let outer = g.nodes_within(x0, lambda * r);
    let pmean = (outer.iter().map(|&n| u.gradient_norm(n).powf(p)).sum::<f64>()
        / outer.len() as f64)
        .powf(1.0 / p);
    if !(pmean > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let mean = inner.iter().map(|&n| u.value(n)).sum::<f64>() / inner.len() as f64;
    let mad = inner.iter().map(|&n| (u.value(n) - mean).abs()).sum::<f64>() / inner.len() as f64;
    Ok(mad / (r * pmean))
}

/// Axis-edge adjacency of the subgraph induced by `nodes` (local indices).
fn induced_axis_graph(g: &Grid, nodes: &[NodeId]) -> Vec<Vec<usize>> {
    let mut local = vec![NONE; g.len()];
    for (i, &n) in nodes.iter().enumerate() {
        local[n as usize] = i as NodeId;
    }
    nodes
        .iter()
        .map(|&n| {
            [0usize, 2, 4, 6]
                .iter()
                .filter_map(|&d| g.neighbor(n, d))
                .filter_map(|m| {
                    let l = local[m as usize];
                    (l != NONE).then_some(l as usize)
                })
                .collect()
        })
        .collect()
}

fn is_connected(adj: &[Vec<usize>]) -> bool {
    if adj.is_empty() {
        return false;
    }
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == adj.len()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Conjugate gradients for a symmetric positive semidefinite operator with
/// a consistent right-hand side.
fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    project: impl Fn(&mut [f64]),
) -> Result<usize> {
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    project(&mut r);
    let bnorm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(it);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Ok(it);
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= tol * bnorm * 1e3 {
        return Ok(max_iter);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// Smallest nonzero eigenvalue of the Neumann graph Laplacian (axis edges,
/// weight `1/h²`) on the subgrid induced by `nodes`; 0 when disconnected.
///
/// Block inverse iteration with Rayleigh-Ritz, so nearly double eigenvalues
/// (symmetric balls) converge at the rate of the next gap.
pub fn neumann_eigenvalue(g: &Grid, nodes: &[NodeId]) -> Result<f64> {
    if nodes.len() < 2 {
        return Err(Error::Degenerate("eigenproblem needs at least two nodes".into()));
    }
    let adj = induced_axis_graph(g, nodes);
    if !is_connected(&adj) {
        return Ok(0.0);
    }
    let inv_h2 = 1.0 / (g.h() * g.h());
    let apply = |x: &[f64], out: &mut [f64]| {
        for (i, nb) in adj.iter().enumerate() {
            out[i] = nb.iter().map(|&j| x[i] - x[j]).sum::<f64>() * inv_h2;
        }
    };
    let n = nodes.len();
    let k = EIGEN_BLOCK.min(n - 1);
    // deterministic start: linear modes plus a wiggle
    let mut xs: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .map(|(i, &m)| {
                    let p = g.point(m);
                    let wiggle = 1e-3 * ((i as f64) * (0.618 + 0.1 * j as f64)).sin();
                    let base = match j {
                        0 => p.x + 0.37 * p.y,
                        1 => p.y - 0.29 * p.x,
                        _ => p.x * p.y,
                    };
                    base + wiggle
                })
                .collect()
        })
        .collect();
    xs.iter_mut().for_each(|x| remove_mean(x));
    orthonormalize(&mut xs);
    let mut ritz = vec![0.0; xs.len()];
    let mut mu_prev = f64::INFINITY;
    let cg_cap = 20 * n + 1000;
    let mut lys = vec![vec![0.0; n]; xs.len()];
    for _ in 0..EIGEN_MAX_ITER {
        let mut ys: Vec<Vec<f64>> = xs
            .iter()
            .zip(&ritz)
            .map(|(x, &m)| {
                let scale = if m > 0.0 { 1.0 / m } else { 1.0 };
                let mut y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                conjugate_gradient(apply, x, &mut y, CG_TOL, cg_cap, remove_mean)?;
                remove_mean(&mut y);
                Ok(y)
            })
            .collect::<Result<_>>()?;
        orthonormalize(&mut ys);
        let m = ys.len();
        lys.truncate(m);
        for (y, ly) in ys.iter().zip(lys.iter_mut()) {
            apply(y, ly);
        }
        let proj = nalgebra::DMatrix::from_fn(m, m, |a, b| 0.5 * (dot(&ys[a], &lys[b]) + dot(&ys[b], &lys[a])));
        let eig = proj.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        xs = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (a, y) in ys.iter().enumerate() {
                    let w = eig.eigenvectors[(a, c)];
                    v.iter_mut().zip(y).for_each(|(vi, yi)| *vi += w * yi);
                }
                v
            })
            .collect();
        ritz = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        let mu = ritz[0];
        if (mu - mu_prev).abs() <= EIGEN_TOL * mu {
            return Ok(mu);
        }
        mu_prev = mu;
    }
    Err(Error::NonConvergence {
        iterations: EIGEN_MAX_ITER,
        residual: (mu_prev - ritz[0]).abs(),
    })
}

/// Modified Gram-Schmidt; vectors that collapse are dropped.
fn orthonormalize(vs: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs.drain(..) {
        let n0 = dot(&v, &v).sqrt();
        for u in &out {
            let c = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-10 * n0 && nv > 0.0 {
            v.iter_mut().for_each(|a| *a /= nv);
            out.push(v);
        }
    }
    *vs = out;
}

/// `1 / (r √μ₁)` on the subgrid induced by `B(x0, r)`; infinite when that
/// subgrid is disconnected.
pub fn poincare_constant_l2(g: &Grid, x0: Point, r: f64) -> Result<f64> {
    check_ball(r, 1.0)?;
    let nodes = g.nodes_within(x0, r);
    let mu = neumann_eigenvalue(g, &nodes)?;
    if mu <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (r * mu.sqrt()))
}

/// Max over node pairs of `B(x0, r)` of
/// `|u(x₁) - u(x₂)| / (|x₁ - x₂|^{1-2/p} ‖∇u‖_{L^p(B(x0,λr))})`.
///
/// Small balls are searched exhaustively; larger ones use the sampler's
/// random pairs plus all pairs between the most extreme values.
pub fn morrey_quotient(
    u: &DiscreteFunction<'_>,
    p: f64,
    x0: Point,
    r: f64,
    lambda: f64,
    s: &Sampler,
) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::InvalidParameter(format!("Morrey quotient needs p > 2, got {p}")));
    }
    morrey_quotient_with_exponent(u, p, 1.0 - 2.0 / p, x0, r, lambda, s)
}

/// Hölder quotient `|u(x1) - u(x2)| / (|x1 - x2|^γ ‖∇u‖_p(λB))` maximized
/// over node pairs of `B(x0, r)`; the Morrey quotient is `γ = 1 - 2/p`.
pub fn morrey_quotient_with_exponent(
    u: &DiscreteFunction<'_>,
    p: f64,
    gamma: f64,
    x0: Point,
    r: f64,
    lambda: f64,
    s: &Sampler,
) -> Result<f64> {
    check_p(p)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("Hölder exponent must be in (0, 1], got {gamma}")));
    }
    check_ball(r, lambda)?;
    let g = u.grid;
    let inner = nonempty_ball(g, x0, r)?;
    let energy = p_dirichlet_energy(u, &g.nodes_within(x0, lambda * r), p);
    if energy == 0.0 {
        if u.is_constant_on(&inner) {
            return Ok(0.0);
        }
        return Err(Error::ZeroEnergy);
    }
    let ratio = |a: NodeId, b: NodeId| {
        let d = g.point(a).dist(g.point(b));
        if d == 0.0 {
            0.0
        } else {
            (u.value(a) - u.value(b)).abs() / d.powf(gamma)
        }
    };
    let best = if inner.len() <= EXHAUSTIVE_PAIRS {
        inner
            .par_iter()
            .enumerate()
            .map(|(i, &a)| inner[i + 1..].iter().map(|&b| ratio(a, b)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    } else {
        let mut order = inner.clone();
        order.sort_by(|&a, &b| u.value(a).total_cmp(&u.value(b)).then(a.cmp(&b)));
        let k = EXTREME_NODES.min(order.len() / 2);
        let (low, high) = (&order[..k], &order[order.len() - k..]);
        let extreme = low
            .iter()
            .flat_map(|&a| high.iter().map(move |&b| (a, b)))
            .map(|(a, b)| ratio(a, b))
            .fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(7);
        let count = s.n_pairs.max(1) * 64;
        let random = (0..count)
            .map(|_| {
                let a = inner[rng.gen_range(0..inner.len())];
                let b = inner[rng.gen_range(0..inner.len())];
                ratio(a, b)
            })
            .fold(0.0, f64::max);
        extreme.max(random)
    };
    Ok(best / energy)
}

/// Condenser `(U, V)` for the discrete p-capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityProblem {
    pub u_set: Vec<NodeId>,
    pub v_set: Vec<NodeId>,
    pub p: f64,
    pub value: Option<f64>,
}

impl CapacityProblem {
    pub fn new(g: &Grid, u_set: Vec<NodeId>, v_set: Vec<NodeId>, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("capacity needs 1 < p < inf, got {p}")));
        }
        if u_set.is_empty() || v_set.is_empty() {
            return Err(Error::InvalidParameter("condenser plates must be nonempty".into()));
        }
        if let Some(&n) = u_set.iter().chain(&v_set).find(|&&n| n as usize >= g.len()) {
            return Err(Error::InvalidParameter(format!("node {n} is not on the grid")));
        }
        let mut in_u = vec![false; g.len()];
        u_set.iter().for_each(|&n| in_u[n as usize] = true);
        if v_set.iter().any(|&n| in_u[n as usize]) {
            return Err(Error::InvalidParameter("condenser plates intersect".into()));
        }
        let sep = u_set
            .par_iter()
            .map(|&a| {
                v_set
                    .iter()
                    .map(|&b| g.point(a).dist(g.point(b)))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min);
        if sep < 2.0 * g.h() * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "plates are {sep} apart, need at least 2h = {}",
                2.0 * g.h()
            )));
        }
        Ok(Self {
            u_set,
            v_set,
            p,
            value: None,
        })
    }

    /// Plates `U = B(c, ρ) ∩ Ω` and `V = Ω \ B(c, R)` of an annular condenser.
    pub fn annulus(g: &Grid, c: Point, rho: f64, big_r: f64, p: f64) -> Result<Self> {
        let u_set = g.nodes_within(c, rho);
        let v_set = (0..g.len() as NodeId)
            .filter(|&n| g.point(n).dist(c) >= big_r)
            .collect();
        Self::new(g, u_set, v_set, p)
    }
}

/// Components of the stencil graph (axis edges).
fn axis_components(g: &Grid) -> Vec<u32> {
    let mut label = vec![NONE; g.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for s in 0..g.len() as NodeId {
        if label[s as usize] != NONE {
            continue;
        }
        label[s as usize] = next;
        queue.push_back(s);
        while let Some(n) = queue.pop_front() {
            for d in [0, 2, 4, 6] {
                if let Some(m) = g.neighbor(n, d) {
                    if label[m as usize] == NONE {
                        label[m as usize] = next;
                        queue.push_back(m);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Discrete p-capacity `min Σ |∇_h u|^p h²` over `u ≥ 1` on `U`, `u ≤ 0` on
/// `V`, together with the minimizer.
pub fn capacity_with_potential<'g>(
    g: &'g Grid,
    prob: &CapacityProblem,
) -> Result<(f64, DiscreteFunction<'g>)> {
    let n = g.len();
    let p = prob.p;
    // 0 = free, 1 = fixed at one, 2 = fixed at zero
    let mut fixed = vec![0u8; n];
    prob.u_set.iter().for_each(|&m| fixed[m as usize] = 1);
    prob.v_set.iter().for_each(|&m| fixed[m as usize] = 2);
    let comp = axis_components(g);
    let ncomp = comp.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let (mut has_u, mut has_v) = (vec![false; ncomp], vec![false; ncomp]);
    for m in 0..n {
        match fixed[m] {
            1 => has_u[comp[m] as usize] = true,
            2 => has_v[comp[m] as usize] = true,
            _ => {}
        }
    }
    // components touching one plate only are constant; the rest are solved
    let mut u = vec![0.0; n];
    let mut free = Vec::new();
    for m in 0..n {
        let c = comp[m] as usize;
        match fixed[m] {
            1 => u[m] = 1.0,
            2 => u[m] = 0.0,
            _ if has_u[c] && has_v[c] => free.push(m as NodeId),
            _ if has_u[c] => u[m] = 1.0,
            _ => u[m] = 0.0,
        }
    }
    if !free.is_empty() {
        solve_harmonic(g, &fixed, &free, &mut u)?;
        if p != 2.0 {
            descend(g, &fixed, &free, p, &mut u)?;
        }
    }
    let f = DiscreteFunction::new(g, u)?;
    let all: Vec<NodeId> = (0..n as NodeId).collect();
    let value = p_dirichlet_energy(&f, &all, p).powf(p);
    Ok((value, f))
}

pub fn capacity(g: &Grid, prob: &CapacityProblem) -> Result<f64> {
    capacity_with_potential(g, prob).map(|(v, _)| v)
}

/// Stencil pairs `(n, m)` with the quadratic energy `Σ (u_m - u_n)²`.
fn stencil_pairs(g: &Grid) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::with_capacity(2 * g.len());
    for n in 0..g.len() as NodeId {
        for axis in 0..2 {
            if let Some((m, _)) = g.gradient_stencil(n, axis) {
                out.push((n, m));
            }
        }
    }
    out
}

/// Minimizes the p = 2 energy over the free nodes with the others held.
fn solve_harmonic(g: &Grid, fixed: &[u8], free: &[NodeId], u: &mut [f64]) -> Result<()> {
    let mut local = vec![usize::MAX; g.len()];
    for (i, &m) in free.iter().enumerate() {
        local[m as usize] = i;
    }
    // A = Σ_pairs (e_m - e_n)(e_m - e_n)^T restricted to free nodes
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); free.len()];
    let mut rhs = vec![0.0; free.len()];
    for (a, b) in stencil_pairs(g) {
        let (la, lb) = (local[a as usize], local[b as usize]);
        for (l, other, lo) in [(la, b, lb), (lb, a, la)] {
            if l == usize::MAX {
                continue;
            }
            rows[l].push((l, 1.0));
            if lo == usize::MAX {
                rhs[l] += u[other as usize];
            } else {
                rows[l].push((lo, -1.0));
            }
        }
    }
    for row in rows.iter_mut() {
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(j, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        *row = merged;
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            *o = rows[i].iter().map(|&(j, v)| v * x[j]).sum();
        });
    };
    let mut x: Vec<f64> = free.iter().map(|&m| u[m as usize]).collect();
    debug_assert!(free.iter().all(|&m| fixed[m as usize] == 0));
    conjugate_gradient(apply, &rhs, &mut x, CG_TOL, 50 * free.len() + 1000, |_| {})?;
    for (i, &m) in free.iter().enumerate() {
        u[m as usize] = x[i].clamp(0.0, 1.0);
    }
    Ok(())
}

fn energy_and_gradient(g: &Grid, pairs_by_node: &[[Option<(NodeId, f64)>; 2]], p: f64, u: &[f64], grad: &mut [f64]) -> f64 {
    let h = g.h();
    let area = h * h;
    grad.iter_mut().for_each(|v| *v = 0.0);
    let mut e = 0.0;
    for (n, st) in pairs_by_node.iter().enumerate() {
        let mut gv = [0.0; 2];
        for axis in 0..2 {
            if let Some((m, s)) = st[axis] {
                gv[axis] = s * (u[m as usize] - u[n]) / h;
            }
        }
        let norm = gv[0].hypot(gv[1]);
        if norm == 0.0 {
            continue;
        }
        e += norm.powf(p) * area;
        let c = p * norm.powf(p - 2.0) * area;
        for axis in 0..2 {
            if let Some((m, s)) = st[axis] {
                let d = c * gv[axis] * s / h;
                grad[m as usize] += d;
                grad[n] -= d;
            }
        }
    }
    e
}

/// Projected Barzilai–Borwein descent with a nonmonotone safeguard.
fn descend(g: &Grid, fixed: &[u8], free: &[NodeId], p: f64, u: &mut [f64]) -> Result<()> {
    let n = g.len();
    let stencils: Vec<[Option<(NodeId, f64)>; 2]> = (0..n as NodeId)
        .map(|m| [g.gradient_stencil(m, 0), g.gradient_stencil(m, 1)])
        .collect();
    let mut is_free = vec![false; n];
    free.iter().for_each(|&m| is_free[m as usize] = true);
    debug_assert!(free.iter().all(|&m| fixed[m as usize] == 0));
    let mut grad = vec![0.0; n];
    let mut e = energy_and_gradient(g, &stencils, p, u, &mut grad);
    let mut history = VecDeque::from([e]);
    let mut step = g.h().powf(2.0 - p).min(1e6) * 0.1;
    let mut trial = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    let mut quiet = 0;
    for _ in 0..CAPACITY_MAX_ITER {
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = step;
        let e_new = loop {
            for m in 0..n {
                trial[m] = if is_free[m] {
                    (u[m] - t * grad[m]).clamp(0.0, 1.0)
                } else {
                    u[m]
                };
            }
            let decrease: f64 = (0..n).map(|m| grad[m] * (u[m] - trial[m])).sum();
            let en = energy_and_gradient(g, &stencils, p, &trial, &mut grad_new);
            if en <= reference - 1e-4 * decrease || t < 1e-30 {
                break en;
            }
            t *= 0.5;
        };
        let (mut ss, mut sy) = (0.0, 0.0);
        for m in 0..n {
            let s = trial[m] - u[m];
            ss += s * s;
            sy += s * (grad_new[m] - grad[m]);
        }
        u.copy_from_slice(&trial);
        std::mem::swap(&mut grad, &mut grad_new);
        let change = (e - e_new).abs() / e_new.max(f64::MIN_POSITIVE);
        e = e_new;
        history.push_back(e);
        if history.len() > 10 {
            history.pop_front();
        }
        quiet = if change < CAPACITY_TOL { quiet + 1 } else { 0 };
        if quiet >= 20 || ss == 0.0 {
            return Ok(());
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { t * 2.0 };
    }
    Err(Error::NonConvergence {
        iterations: CAPACITY_MAX_ITER,
        residual: (history.front().copied().unwrap_or(e) - e).abs() / e.max(f64::MIN_POSITIVE),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertificateSide {
    LowerBound,
    UpperEstimate,
}

impl fmt::Display for CertificateSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateSide::LowerBound => "lower_bound",
            CertificateSide::UpperEstimate => "upper_estimate",
        })
    }
}

/// One evaluated inequality at one `(x0, r)` cell.
///
/// `test_function_id` has the form `<function>:<functional>`, where the
/// functional is `poincare` (mean-deviation quotient), `sp` (the local
/// Sobolev–Poincaré / Trudinger / Morrey quotient) or `eigen`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCertificate {
    pub center_index: usize,
    pub radius_index: usize,
    pub p: f64,
    pub x0: Point,
    pub r: f64,
    pub lambda: f64,
    pub side: CertificateSide,
    pub constant: f64,
    pub test_function_id: String,
    /// Inner constant of the exponential functional (p = 2 only).
    pub a: Option<f64>,
    pub error: Option<String>,
}

impl InequalityCertificate {
    pub fn functional(&self) -> &str {
        self.test_function_id.rsplit(':').next().unwrap_or("")
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.constant.is_finite()
    }
}

/// Certificates of a sweep in `(center, radius)` order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificateTable {
    pub rows: Vec<InequalityCertificate>,
}

impl CertificateTable {
    /// Max over valid lower-bound rows of the given functional.
    pub fn max_lower(&self, functional: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|c| c.side == CertificateSide::LowerBound && c.is_ok() && c.functional() == functional)
            .map(|c| c.constant)
            .reduce(f64::max)
    }

    /// Min over valid upper-estimate rows.
    pub fn min_upper(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|c| c.side == CertificateSide::UpperEstimate && c.is_ok())
            .map(|c| c.constant)
            .reduce(f64::min)
    }

    pub fn cell(&self, center: usize, radius: usize) -> impl Iterator<Item = &InequalityCertificate> {
        self.rows
            .iter()
            .filter(move |c| c.center_index == center && c.radius_index == radius)
    }
}

/// Log-function parameters emitted per cell.
pub const SWEEP_LOG_BS: [f64; 2] = [1.0 / 16.0, 1.0 / 64.0];

/// A node at distance `0.75r` from `x0` in one of eight directions, else the
/// node farthest from `x0` inside that distance.
fn pick_seed(g: &Grid, x0: Point, r: f64) -> Option<Point> {
    (0..8)
        .find_map(|k| {
            let t = k as f64 * std::f64::consts::FRAC_PI_4;
            let p = x0 + Point::new(t.cos(), t.sin()) * (0.75 * r);
            g.snap(p).ok().map(|n| g.point(n))
        })
        .or_else(|| {
            g.points()
                .iter()
                .copied()
                .filter(|q| q.dist(x0) <= 0.75 * r)
                .max_by(|a, b| a.dist(x0).total_cmp(&b.dist(x0)))
        })
}

/// Default sweep layout: the deepest node, then the nodes nearest each
/// reflex vertex, then seeded samples; radii halve from the diameter.
pub fn sweep_cells(g: &Grid, seed: u64, n_centers: usize, n_radii: usize) -> (Vec<Point>, Vec<f64>) {
    let mut nodes: Vec<NodeId> = Vec::with_capacity(n_centers);
    let push = |n: NodeId, nodes: &mut Vec<NodeId>| {
        if nodes.len() < n_centers && !nodes.contains(&n) {
            nodes.push(n);
        }
    };
    if let Some(deep) = (0..g.len() as NodeId).max_by(|&a, &b| g.dist(a).total_cmp(&g.dist(b)).then(b.cmp(&a))) {
        push(deep, &mut nodes);
    }
    for v in g.domain().reflex_vertices() {
        if let Some(n) = (0..g.len() as NodeId)
            .min_by(|&a, &b| g.point(a).dist(v).total_cmp(&g.point(b).dist(v)).then(a.cmp(&b)))
        {
            push(n, &mut nodes);
        }
    }
    let sampler = Sampler::new(seed, 0, 0).with_strategy(crate::conditions::Strategy::UniformNodes);
    let mut k = n_centers;
    while nodes.len() < n_centers.min(g.len()) {
        for n in sampler.points(g, k) {
            push(n, &mut nodes);
        }
        k *= 2;
    }
    let diam = g.domain().diameter();
    let radii = (0..n_radii).map(|k| diam * 0.5f64.powi(k as i32)).collect();
    (nodes.into_iter().map(|n| g.point(n)).collect(), radii)
}

/// Evaluates the test functions on every `(center, radius)` cell. The log
/// functions are windowed at `λr`, so each cell only sees its dilated ball.
pub fn sp_sweep(
    g: &Grid,
    p: f64,
    centers: &[Point],
    radii: &[f64],
    lambda: f64,
) -> Result<CertificateTable> {
    check_p(p)?;
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::InvalidParameter("sweep needs centers and radii".into()));
    }
    let vis = VisibilityGraph::new(g.domain());
    let cells: Vec<(usize, usize)> = (0..centers.len())
        .flat_map(|i| (0..radii.len()).map(move |j| (i, j)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, j)| sweep_cell(g, &vis, p, centers[i], radii[j], lambda, i, j))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(CertificateTable { rows })
}

#[allow(clippy::too_many_arguments)]
fn sweep_cell(
    g: &Grid,
    vis: &VisibilityGraph,
    p: f64,
    x0: Point,
    r: f64,
    lambda: f64,
    ci: usize,
    ri: usize,
) -> Vec<InequalityCertificate> {
    let row = |side, id: String, lam: f64, res: Result<f64>| {
        let (constant, error) = match res {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        InequalityCertificate {
            center_index: ci,
            radius_index: ri,
            p,
            x0,
            r,
            lambda: lam,
            side,
            constant,
            test_function_id: id,
            a: (p == 2.0).then_some(DEFAULT_A),
            error,
        }
    };
    let mut out = Vec::new();
    let mut lower = |name: String, f: Result<DiscreteFunction<'_>>| match f {
        Ok(u) => {
            out.push(row(
                CertificateSide::LowerBound,
                format!("{name}:poincare"),
                lambda,
                poincare_quotient(&u, p, x0, r, lambda),
            ));
            out.push(row(
                CertificateSide::LowerBound,
                format!("{name}:sp"),
                lambda,
                local_sp_functional(&u, p, x0, r, lambda),
            ));
        }
        Err(e) => {
            for kind in ["poincare", "sp"] {
                out.push(row(
                    CertificateSide::LowerBound,
                    format!("{name}:{kind}"),
                    lambda,
                    Err(e.clone_message()),
                ));
            }
        }
    };
    let seed = pick_seed(g, x0, r);
    for b in SWEEP_LOG_BS {
        let name = format!("log_b{}", fraction(b));
        let f = seed
            .ok_or_else(|| Error::Degenerate("no seed node near the ball".into()))
            .and_then(|s| log_test_function(g, x0, r, b, s, Some(lambda * r)));
        lower(name, f);
    }
    lower(
        "annulus_1_1/2".to_string(),
        annulus_test_function_with(g, vis, x0, r, 1.0, 0.5),
    );
    if p == 2.0 {
        out.push(row(
            CertificateSide::UpperEstimate,
            "neumann:eigen".to_string(),
            1.0,
            poincare_constant_l2(g, x0, r),
        ));
    }
    out
}

fn fraction(b: f64) -> String {
    let inv = 1.0 / b;
    if (inv - inv.round()).abs() < 1e-9 {
        format!("1/{}", inv.round() as i64)
    } else {
        format!("{b}")
    }
}

impl Error {
    fn clone_message(&self) -> Error {
        match self {
            Error::Degenerate(m) => Error::Degenerate(m.clone()),
            Error::InvalidParameter(m) => Error::InvalidParameter(m.clone()),
            Error::Disconnected(m) => Error::Disconnected(m.clone()),
            Error::ZeroEnergy => Error::ZeroEnergy,
            &Error::NonConvergence { iterations, residual } => Error::NonConvergence { iterations, residual },
            other => Error::Degenerate(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::grid::discretize;
    use proptest::prelude::*;
    use rand::Rng;

    fn square(h: f64) -> Grid {
        discretize(&gallery::square().unwrap().domain, h).unwrap()
    }

    fn disk(h: f64) -> Grid {
        discretize(&gallery::disk(64).unwrap().domain, h).unwrap()
    }

    #[test]
    fn constant_has_zero_energy() {
        let g = square(1.0 / 16.0);
        let u = DiscreteFunction::constant(&g, 3.0).unwrap();
        let all: Vec<NodeId> = (0..g.len() as NodeId).collect();
        assert_eq!(p_dirichlet_energy(&u, &all, 2.0), 0.0);
        let c = Point::new(0.5, 0.5);
        assert!(matches!(local_sp_functional(&u, 1.0, c, 0.25, 1.0), Err(Error::ZeroEnergy)));
        assert!(matches!(poincare_quotient(&u, 2.0, c, 0.25, 1.0), Err(Error::ZeroEnergy)));
        assert_eq!(morrey_quotient(&u, 4.0, c, 0.25, 1.0, &Sampler::default()).unwrap(), 0.0);
    }

    #[test]
    fn linear_energy() {
        let g = square(1.0 / 64.0);
        let u = DiscreteFunction::from_fn(&g, |p| p.x).unwrap();
        let all: Vec<NodeId> = (0..g.len() as NodeId).collect();
        assert!((p_dirichlet_energy(&u, &all, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let g = square(1.0 / 8.0);
        assert!(DiscreteFunction::new(&g, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g.len()];
        v[2] = f64::NAN;
        assert!(DiscreteFunction::new(&g, v).is_err());
    }

    #[test]
    fn sp_functional_is_scale_invariant() {
        let d = gallery::square().unwrap().domain;
        let g1 = discretize(&d, 1.0 / 64.0).unwrap();
        let d2 = d.similarity_transform(2.0, 0.0, Point::new(0.0, 0.0)).unwrap();
        let g2 = discretize(&d2, 2.0 / 64.0).unwrap();
        let u1 = DiscreteFunction::from_fn(&g1, |p| p.x).unwrap();
        let u2 = DiscreteFunction::from_fn(&g2, |p| p.x / 2.0).unwrap();
        let q1 = local_sp_functional(&u1, 1.0, Point::new(0.5, 0.5), 0.25, 1.0).unwrap();
        let q2 = local_sp_functional(&u2, 1.0, Point::new(1.0, 1.0), 0.5, 1.0).unwrap();
        assert!(q1.is_finite() && q1 > 0.0);
        assert!((q1 / q2 - 1.0).abs() < 0.03, "{q1} {q2}");
    }

    #[test]
    fn trudinger_of_zero_is_ball_fraction() {
        let g = square(1.0 / 64.0);
        let u = DiscreteFunction::constant(&g, 0.0).unwrap();
        let v = trudinger_functional(&u, Point::new(0.5, 0.5), 0.25, 2.0, 1.0).unwrap();
        assert!(v <= 1.0 + 0.02 && v > 0.95, "{v}");
        let v = trudinger_functional(&u, Point::new(0.0, 0.0), 0.25, 2.0, 1.0).unwrap();
        assert!((v - 0.25).abs() < 0.03, "{v}");
    }

    #[test]
    fn trudinger_monotone_in_a() {
        let g = square(1.0 / 32.0);
        let u = DiscreteFunction::from_fn(&g, |p| (5.0 * p.x).sin() + p.y * p.y).unwrap();
        let c = Point::new(0.4, 0.6);
        let mut a = 4.0;
        let mut prev = trudinger_log_functional(&u, c, 0.3, 1.5, a).unwrap();
        for _ in 0..6 {
            a /= 2.0;
            let v = trudinger_log_functional(&u, c, 0.3, 1.5, a).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn trudinger_handles_overflow() {
        let g = square(1.0 / 32.0);
        let u = DiscreteFunction::from_fn(&g, |p| if p.x > 0.5 { 1.0 } else { 0.0 }).unwrap();
        let v = trudinger_log_functional(&u, Point::new(0.5, 0.5), 0.3, 1.0, 1e3).unwrap();
        assert!(v.is_finite() && v > 700.0);
    }

    #[test]
    fn orlicz_homogeneous() {
        let g = square(1.0 / 32.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = DiscreteFunction::new(&g, (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let all: Vec<NodeId> = (0..g.len() as NodeId).collect();
        let n1 = orlicz_norm(&f, &all);
        let n3 = orlicz_norm(&f.scaled(3.0).unwrap(), &all);
        assert!(n1 > 0.0);
        assert!((n3 - 3.0 * n1).abs() <= 1e-12 * n3, "{n1} {n3}");
        let n = orlicz_norm(&f.scaled(-3.0).unwrap(), &all);
        assert!((n - 3.0 * n1).abs() <= 1e-12 * n);
        assert_eq!(orlicz_norm(&DiscreteFunction::constant(&g, 0.0).unwrap(), &all), 0.0);
    }

    #[test]
    fn orlicz_of_indicator() {
        // oracle: φ(1/s)·|E| = 1 ⇒ s = 1/sqrt(ln(1 + 1/|E|))
        let g = square(1.0 / 32.0);
        let f = DiscreteFunction::constant(&g, 1.0).unwrap();
        let all: Vec<NodeId> = (0..g.len() as NodeId).collect();
        let expected = 1.0 / (2.0f64).ln().sqrt();
        assert!((orlicz_norm(&f, &all) - expected).abs() < 1e-12);
    }

    #[test]
    fn annulus_function_values() {
        let g = square(1.0 / 64.0);
        let x = Point::new(0.5 + 1.0 / 128.0, 0.5 + 1.0 / 128.0);
        let u = annulus_test_function(&g, x, 0.25, 1.0, 0.5).unwrap();
        let c = g.snap(x).unwrap();
        assert_eq!(u.value(c), 1.0);
        let target = g.snap(g.point(c) + Point::new(0.1875, 0.0)).unwrap();
        assert!((u.value(target) - 0.5).abs() < 1e-12);
        for n in 0..g.len() as NodeId {
            if g.point(n).dist(g.point(c)) >= 0.25 {
                assert_eq!(u.value(n), 0.0);
            }
            let bound = 1.0 / (0.25 - 0.125) * (1.0 + 5.0 * g.h() / 0.25);
            assert!(u.gradient_norm(n) <= bound);
        }
        assert!(annulus_test_function(&g, x, 0.25, 0.5, 0.5).is_err());
    }

    #[test]
    fn halving_ladder_halves() {
        let g = square(1.0 / 64.0);
        let steps = halving_ladder(&g, Point::new(0.5, 0.5), 0.4, 4).unwrap();
        assert_eq!(steps.len(), 4);
        for w in steps.windows(2) {
            assert!(w[1].b < w[0].b);
        }
        for s in &steps {
            assert!((s.ratio - 0.5).abs() < 0.05, "{s:?}");
        }
        // disk-shaped balls: halving area divides the radius by √2
        assert!((steps[0].b - 0.5f64.sqrt()).abs() < 0.03);
    }

    #[test]
    fn log_function_values() {
        let g = disk(1.0 / 128.0);
        let x0 = Point::new(0.0, 0.0);
        let (r, b) = (0.5, 1.0 / 16.0);
        let u = log_test_function(&g, x0, r, b, Point::new(0.3, 0.0), None).unwrap();
        let scale = (1.0 / (2.0 * b)).ln();
        for n in 0..g.len() as NodeId {
            let t = g.point(n).dist(x0);
            let expected = if t < b * r {
                0.0
            } else if t >= r / 2.0 {
                1.0
            } else {
                (t / (b * r)).ln() / scale
            };
            assert!((u.value(n) - expected).abs() < 1e-12);
        }
        assert!(log_test_function(&g, x0, r, b, Point::new(0.01, 0.0), None).is_err());
    }

    #[test]
    fn log_function_gradient_matches() {
        let g = disk(1.0 / 256.0);
        let x0 = Point::new(0.0, 0.0);
        let (r, b) = (0.5, 1.0 / 16.0);
        let u = log_test_function(&g, x0, r, b, Point::new(0.3, 0.0), None).unwrap();
        let scale = (1.0 / (2.0 * b)).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let annulus: Vec<NodeId> = (0..g.len() as NodeId)
            .filter(|&n| {
                let t = g.point(n).dist(x0);
                t > b * r + 2.0 * g.h() && t < r / 2.0 - 2.0 * g.h()
            })
            .collect();
        for _ in 0..100 {
            let n = annulus[rng.gen_range(0..annulus.len())];
            let t = g.point(n).dist(x0);
            let exact = 1.0 / (scale * t);
            let err = (u.gradient_norm(n) - exact).abs();
            assert!(err <= 2.0 * g.h() / t * exact.max(1.0 / scale), "{err} at {t}");
        }
    }

    #[test]
    fn log_energy_matches_closed_form() {
        // quadrature oracle: (1/log(1/2b)) (2π ∫_{br}^{r/2} ρ^{1-p} dρ)^{1/p}
        let g = disk(1.0 / 256.0);
        let x0 = Point::new(0.0, 0.0);
        let (r, b, p) = (0.25, 1.0 / 16.0, 1.5);
        let u = log_test_function(&g, x0, r, b, Point::new(0.2, 0.0), None).unwrap();
        let nodes = g.nodes_within(x0, 2.0 * r);
        let e = p_dirichlet_energy(&u, &nodes, p);
        let integral = 2.0 * std::f64::consts::PI * ((r / 2.0).powf(2.0 - p) - (b * r).powf(2.0 - p)) / (2.0 - p);
        let expected = integral.powf(1.0 / p) / (1.0 / (2.0 * b)).ln();
        assert!((e / expected - 1.0).abs() < 0.1, "{e} {expected}");
    }

    #[test]
    fn windowed_log_function_is_local() {
        let g = discretize(&gallery::slit_disk(1.0 / 16.0, 64).unwrap().domain, 1.0 / 128.0).unwrap();
        let x0 = Point::new(0.55, 0.0);
        let r = 0.25;
        let u = log_test_function(&g, x0, r, 1.0 / 8.0, Point::new(0.55, 0.2), Some(r)).unwrap();
        let above = g.snap(Point::new(0.55, 0.2)).unwrap();
        let below = g.snap(Point::new(0.55, -0.2)).unwrap();
        assert_eq!(u.value(above), 1.0);
        assert_eq!(u.value(below), 0.0);
        let far = g.snap(Point::new(-0.5, 0.0)).unwrap();
        assert_eq!(u.value(far), 0.0);
        // without the window both sides join around the tip
        let v = log_test_function(&g, x0, r, 1.0 / 8.0, Point::new(0.55, 0.2), None).unwrap();
        assert_eq!(v.value(below), 1.0);
    }

    #[test]
    fn poincare_quotient_linear_oracle() {
        // disk quadrature oracle for u = x on B(c, r): mean |x - c_x| = 4r/(3π)
        let g = square(1.0 / 256.0);
        let u = DiscreteFunction::from_fn(&g, |p| p.x).unwrap();
        let q = poincare_quotient(&u, 2.0, Point::new(0.5, 0.5), 0.25, 1.0).unwrap();
        let expected = 4.0 / (3.0 * std::f64::consts::PI);
        assert!((q / expected - 1.0).abs() < 0.05, "{q} {expected}");
    }

    #[test]
    fn two_node_eigen() {
        let g = square(1.0 / 8.0);
        let a = g.point(g.snap(Point::new(0.5 - 1.0 / 16.0, 0.5 - 1.0 / 16.0)).unwrap());
        let mid = a + Point::new(1.0 / 16.0, 0.0);
        let nodes = g.nodes_within(mid, g.h());
        assert_eq!(nodes.len(), 2);
        let mu = neumann_eigenvalue(&g, &nodes).unwrap();
        assert!((mu - 2.0 / (g.h() * g.h())).abs() < 1e-9 * mu);
        let c = poincare_constant_l2(&g, mid, g.h()).unwrap();
        assert!((c - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn square_eigen_converges() {
        let c64 = poincare_constant_l2(&square(1.0 / 64.0), Point::new(0.5, 0.5), 2.0).unwrap();
        let c128 = poincare_constant_l2(&square(1.0 / 128.0), Point::new(0.5, 0.5), 2.0).unwrap();
        assert!((c64 / c128 - 1.0).abs() < 0.05);
        // continuum: μ₁ = π²
        assert!((c128 - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 0.01, "{c128}");
    }

    #[test]
    fn eigen_bounds_poincare_quotient() {
        let g = disk(1.0 / 64.0);
        let c = Point::new(0.2, -0.1);
        let r = 0.4;
        let bound = poincare_constant_l2(&g, c, r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let u = DiscreteFunction::from_fn(&g, |p| (a * p.x).sin() + (b * p.y).cos() + p.x * p.y).unwrap();
            let q = poincare_quotient(&u, 2.0, c, r, 1.0).unwrap();
            assert!(q <= bound * 1.05, "{q} {bound}");
        }
    }

    #[test]
    fn disconnected_ball_has_infinite_constant() {
        let g = discretize(&gallery::slit_disk(1.0 / 16.0, 64).unwrap().domain, 1.0 / 64.0).unwrap();
        let c = poincare_constant_l2(&g, Point::new(0.55, 0.0), 0.25).unwrap();
        assert!(c.is_infinite());
    }

    #[test]
    fn morrey_matches_exhaustive() {
        let g = square(1.0 / 32.0);
        let u = DiscreteFunction::from_fn(&g, |p| p.x).unwrap();
        let (c, r, p) = (Point::new(0.5, 0.5), 0.25, 4.0);
        let q = morrey_quotient(&u, p, c, r, 1.0, &Sampler::default()).unwrap();
        let nodes = g.nodes_within(c, r);
        let e = p_dirichlet_energy(&u, &nodes, p);
        let mut best: f64 = 0.0;
        let mut best_d: f64 = 0.0;
        for &a in &nodes {
            for &b in &nodes {
                let d = g.point(a).dist(g.point(b));
                if d > 0.0 {
                    let v = (u.value(a) - u.value(b)).abs() / d.powf(0.5);
                    if v > best {
                        best = v;
                        best_d = d;
                    }
                }
            }
        }
        assert!((q - best / e).abs() < 1e-12);
        // attained at a max-separation pair along x
        assert!(best_d > 2.0 * r - 2.0 * g.h());
    }

    #[test]
    fn capacity_validation() {
        let g = square(1.0 / 32.0);
        let a = g.nodes_within(Point::new(0.3, 0.5), 0.1);
        assert!(CapacityProblem::new(&g, a.clone(), a.clone(), 2.0).is_err());
        let b = g.nodes_within(Point::new(0.41, 0.5), 0.1);
        assert!(CapacityProblem::new(&g, a.clone(), b, 2.0).is_err());
        let c = g.nodes_within(Point::new(0.8, 0.5), 0.1);
        assert!(CapacityProblem::new(&g, a, c, 1.0).is_err());
    }

    #[test]
    fn capacity_monotone_in_plate() {
        let g = square(1.0 / 32.0);
        let v = g.nodes_within(Point::new(0.8, 0.5), 0.1);
        let mut prev = 0.0;
        for rho in [0.05, 0.1, 0.15, 0.2] {
            let u = g.nodes_within(Point::new(0.3, 0.5), rho);
            for p in [2.0, 1.5, 3.0] {
                let prob = CapacityProblem::new(&g, u.clone(), v.clone(), p).unwrap();
                let val = capacity(&g, &prob).unwrap();
                assert!(val > 0.0);
                if p == 2.0 {
                    assert!(val >= prev);
                    prev = val;
                }
            }
        }
    }

    #[test]
    fn capacity_p_descent_improves_on_harmonic() {
        let g = square(1.0 / 32.0);
        let u = g.nodes_within(Point::new(0.3, 0.5), 0.1);
        let v = g.nodes_within(Point::new(0.75, 0.5), 0.1);
        for p in [1.5, 3.0] {
            let prob = CapacityProblem::new(&g, u.clone(), v.clone(), p).unwrap();
            let (val, pot) = capacity_with_potential(&g, &prob).unwrap();
            let harmonic = capacity_with_potential(&g, &CapacityProblem { p: 2.0, ..prob.clone() }).unwrap().1;
            let all: Vec<NodeId> = (0..g.len() as NodeId).collect();
            let at_harmonic = p_dirichlet_energy(&harmonic, &all, p).powf(p);
            assert!(val <= at_harmonic * (1.0 + 1e-9), "{val} {at_harmonic}");
            assert!(pot.values().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn capacity_zero_across_components() {
        // the corridors are thinner than a cell, so the rooms do not connect
        let d = gallery::rooms_and_corridors(2, 1.0 / 128.0).unwrap().domain;
        let g = discretize(&d, 1.0 / 32.0).unwrap();
        assert_eq!(g.component_count(), 2);
        let u_set = g.nodes_within(Point::new(0.25, 0.25), 0.1);
        let v_set = g.nodes_within(Point::new(1.0, 0.25), 0.1);
        for p in [2.0, 1.5, 4.0] {
            let prob = CapacityProblem::new(&g, u_set.clone(), v_set.clone(), p).unwrap();
            assert_eq!(capacity(&g, &prob).unwrap(), 0.0);
        }
    }

    #[test]
    fn sweep_reports_rows_in_order() {
        let g = disk(1.0 / 32.0);
        let centers = [Point::new(0.0, 0.0), Point::new(0.4, 0.1)];
        let radii = [0.5, 0.25];
        let t = sp_sweep(&g, 2.0, &centers, &radii, 1.0).unwrap();
        assert_eq!(t.rows.len(), 4 * (3 * 2 + 1));
        let keys: Vec<(usize, usize)> = t.rows.iter().map(|c| (c.center_index, c.radius_index)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let max = t.max_lower("poincare").unwrap();
        for c in &t.rows {
            if c.functional() == "poincare" && c.is_ok() {
                assert!(c.constant <= max);
            }
        }
        // lower bounds sit under the eigen estimate of their own cell
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let up = t.cell(i, j).find(|c| c.side == CertificateSide::UpperEstimate).unwrap().constant;
            for c in t.cell(i, j).filter(|c| c.functional() == "poincare" && c.is_ok()) {
                assert!(c.constant <= up * 1.1, "{c:?} {up}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn power_mean_monotone(seed in 0u64..1000) {
            let g = square(1.0 / 16.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = DiscreteFunction::new(&g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let c = Point::new(0.5, 0.5);
            let q1 = poincare_quotient(&u, 1.0, c, 0.3, 1.5).unwrap();
            let q2 = poincare_quotient(&u, 2.0, c, 0.3, 1.5).unwrap();
            let q4 = poincare_quotient(&u, 4.0, c, 0.3, 1.5).unwrap();
            prop_assert!(q1 >= q2 && q2 >= q4);
        }

        #[test]
        fn capacity_scale_invariant(s in 0.5f64..3.0) {
            let d = gallery::square().unwrap().domain;
            let g1 = discretize(&d, 1.0 / 16.0).unwrap();
            let d2 = d.similarity_transform(s, 0.0, Point::new(0.0, 0.0)).unwrap();
            let g2 = discretize(&d2, s / 16.0).unwrap();
            let c1 = capacity(&g1, &CapacityProblem::new(&g1, g1.nodes_within(Point::new(0.3, 0.5), 0.1), g1.nodes_within(Point::new(0.7, 0.5), 0.1), 2.0).unwrap()).unwrap();
            let c2 = capacity(&g2, &CapacityProblem::new(&g2, g2.nodes_within(Point::new(0.3 * s, 0.5 * s), 0.1 * s), g2.nodes_within(Point::new(0.7 * s, 0.5 * s), 0.1 * s), 2.0).unwrap()).unwrap();
            prop_assert!((c1 / c2 - 1.0).abs() < 0.02);
        }
    }
}
