//! Polygonal domains: an outer ring with optional hole rings.
//!
//! Membership is strict: boundary points are outside, so every grid node
//! built from a domain has a positive distance to the boundary.

use std::fmt::Write as _;

use crate::error::{Error, Result, RingRef};
use crate::geom::{
    on_segment, orient, point_segment_distance, ring_edges, ring_side, segment_segment_distance,
    segments_cross_properly, segments_intersect, signed_area2, Orientation, Point, RingSide,
};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DomainMeta {
    pub slice: Option<bool>,
    pub expected_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalDomain {
    outer: Vec<Point>,
    holes: Vec<Vec<Point>>,
    pub name: String,
    pub meta: DomainMeta,
    diameter: f64,
}

impl PolygonalDomain {
    /// Builds and validates a domain. The outer ring must be counterclockwise
    /// and holes clockwise.
    pub fn new(outer: Vec<Point>, holes: Vec<Vec<Point>>, name: impl Into<String>) -> Result<Self> {
        validate(&outer, &holes)?;
        let diameter = vertex_diameter(&outer);
        Ok(Self {
            outer,
            holes,
            name: name.into(),
            meta: DomainMeta::default(),
            diameter,
        })
    }

    pub fn with_meta(mut self, meta: DomainMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn outer(&self) -> &[Point] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.outer.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings().flat_map(ring_edges)
    }

    pub fn edge_count(&self) -> usize {
        self.rings().map(|r| r.len()).sum()
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn area(&self) -> f64 {
        self.rings().map(|r| 0.5 * signed_area2(r)).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.outer {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Strict interior test (even-odd over all rings, boundary excluded).
    pub fn contains(&self, p: Point) -> bool {
        match ring_side(&self.outer, p) {
            RingSide::Inside => {}
            _ => return false,
        }
        self.holes
            .iter()
            .all(|h| ring_side(h, p) == RingSide::Outside)
    }

    /// Closed-domain test: interior or boundary.
    pub fn contains_closed(&self, p: Point) -> bool {
        if self.on_boundary(p) {
            return true;
        }
        self.contains(p)
    }

    pub fn on_boundary(&self, p: Point) -> bool {
        self.edges().any(|(a, b)| on_segment(p, a, b))
    }

    /// Distance to the union of boundary segments, without the membership check.
    pub fn boundary_distance_unchecked(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_distance(&self, p: Point) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.boundary_distance_unchecked(p))
    }

    /// The open segment `(a, b)` together with both endpoints lies in the
    /// open domain. Endpoints are assumed inside.
    pub fn segment_inside(&self, a: Point, b: Point) -> bool {
        !self.edges().any(|(c, d)| segments_intersect(a, b, c, d))
    }

    /// The closed segment lies in the closed domain. Used by the visibility
    /// graph, where paths may touch reflex vertices.
    pub fn segment_in_closure(&self, a: Point, b: Point) -> bool {
        if self
            .edges()
            .any(|(c, d)| segments_cross_properly(a, b, c, d))
        {
            return false;
        }
        // split at boundary vertices lying on the segment and test each piece
        let ab = b - a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return self.contains_closed(a);
        }
        let mut cuts = vec![0.0, 1.0];
        for ring in self.rings() {
            for &v in ring {
                if v != a && v != b && on_segment(v, a, b) {
                    cuts.push((v - a).dot(ab) / len2);
                }
            }
        }
        cuts.sort_by(|x, y| x.total_cmp(y));
        cuts.windows(2).all(|w| {
            if w[1] - w[0] <= 0.0 {
                return true;
            }
            self.contains_closed(a.lerp(b, 0.5 * (w[0] + w[1])))
        })
    }

    /// Vertices where the interior angle exceeds pi. Shortest paths only bend
    /// at these.
    pub fn reflex_vertices(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for ring in self.rings() {
            let n = ring.len();
            for i in 0..n {
                let prev = ring[(i + n - 1) % n];
                let next = ring[(i + 1) % n];
                // interior lies to the left for both ring orientations used here
                if orient(prev, ring[i], next) == Orientation::Clockwise {
                    out.push(ring[i]);
                }
            }
        }
        out
    }

    /// Smallest distance between two non-adjacent boundary edges.
    pub fn narrowest_feature(&self) -> f64 {
        let edges: Vec<(Point, Point)> = self.edges().collect();
        let mut best = f64::INFINITY;
        for i in 0..edges.len() {
            for j in (i + 1)..edges.len() {
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if a == c || a == d || b == c || b == d {
                    continue;
                }
                best = best.min(segment_segment_distance(a, b, c, d));
            }
        }
        best
    }

    /// Maps every vertex by `p -> scale * R(rotation) p + shift`.
    pub fn similarity_transform(&self, scale: f64, rotation: f64, shift: Point) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "similarity scale must be positive, got {scale}"
            )));
        }
        let (s, c) = rotation.sin_cos();
        let map = |p: &Point| {
            Point::new(
                scale * (c * p.x - s * p.y) + shift.x,
                scale * (s * p.x + c * p.y) + shift.y,
            )
        };
        let outer: Vec<Point> = self.outer.iter().map(map).collect();
        let holes: Vec<Vec<Point>> = self
            .holes
            .iter()
            .map(|h| h.iter().map(map).collect())
            .collect();
        let diameter = vertex_diameter(&outer);
        Ok(Self {
            outer,
            holes,
            name: self.name.clone(),
            meta: self.meta.clone(),
            diameter,
        })
    }

    /// Line-oriented text form; `parse` of the output reproduces the vertex
    /// lists bit for bit.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            let _ = writeln!(out, "meta: name={}", self.name);
        }
        if let Some(s) = self.meta.slice {
            let _ = writeln!(out, "meta: slice={s}");
        }
        if let Some(c) = &self.meta.expected_class {
            let _ = writeln!(out, "meta: expected_class={c}");
        }
        let ring_text = |ring: &[Point]| {
            ring.iter()
                .map(|p| format!("{} {}", p.x, p.y))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let _ = writeln!(out, "outer: {}", ring_text(&self.outer));
        for h in &self.holes {
            let _ = writeln!(out, "hole: {}", ring_text(h));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut outer: Option<Vec<Point>> = None;
        let mut holes = Vec::new();
        let mut name = String::new();
        let mut meta = DomainMeta::default();

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let Some(colon) = line.find(':') else {
                return Err(syntax(line_no, 1, "expected `outer:`, `hole:` or `meta:`"));
            };
            let key = line[..colon].trim();
            let body = &line[colon + 1..];
            let body_col = colon + 2;
            match key {
                "outer" => {
                    if outer.is_some() {
                        return Err(syntax(line_no, 1, "duplicate `outer:` line"));
                    }
                    outer = Some(parse_ring(body, line_no, body_col)?);
                }
                "hole" => holes.push(parse_ring(body, line_no, body_col)?),
                "meta" => {
                    let Some(eq) = body.find('=') else {
                        return Err(syntax(line_no, body_col, "expected key=value"));
                    };
                    let k = body[..eq].trim();
                    let v = body[eq + 1..].trim();
                    match k {
                        "name" => name = v.to_string(),
                        "expected_class" => meta.expected_class = Some(v.to_string()),
                        "slice" => {
                            meta.slice = Some(match v {
                                "true" | "yes" => true,
                                "false" | "no" => false,
                                _ => {
                                    return Err(syntax(
                                        line_no,
                                        body_col + eq + 1,
                                        "slice must be true/false",
                                    ))
                                }
                            })
                        }
                        _ => {
                            return Err(syntax(
                                line_no,
                                body_col,
                                &format!("unknown meta key `{k}`"),
                            ))
                        }
                    }
                }
                _ => return Err(syntax(line_no, 1, &format!("unknown line kind `{key}`"))),
            }
        }
        let Some(outer) = outer else {
            return Err(syntax(1, 1, "missing `outer:` line"));
        };
        Ok(Self::new(outer, holes, name)?.with_meta(meta))
    }
}

fn syntax(line: usize, column: usize, message: &str) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.to_string(),
    }
}

fn parse_ring(body: &str, line: usize, col0: usize) -> Result<Vec<Point>> {
    let mut ring = Vec::new();
    let mut offset = 0;
    for chunk in body.split(';') {
        let chunk_col = col0 + offset;
        offset += chunk.len() + 1;
        if chunk.trim().is_empty() {
            continue;
        }
        let mut coords = Vec::with_capacity(2);
        let mut pos = 0;
        for tok in chunk.split_whitespace() {
            let tok_off = chunk[pos..].find(tok).map(|i| i + pos).unwrap_or(pos);
            pos = tok_off + tok.len();
            let v: f64 = tok.parse().map_err(|_| {
                syntax(line, chunk_col + tok_off, &format!("bad number `{tok}`"))
            })?;
            if !v.is_finite() {
                return Err(syntax(line, chunk_col + tok_off, "non-finite coordinate"));
            }
            coords.push(v);
        }
        if coords.len() != 2 {
            return Err(syntax(line, chunk_col, "expected `x y` pair"));
        }
        ring.push(Point::new(coords[0], coords[1]));
    }
    Ok(ring)
}

fn vertex_diameter(ring: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..ring.len() {
        for j in (i + 1)..ring.len() {
            d = d.max(ring[i].dist(ring[j]));
        }
    }
    d
}

fn check_simple(ring: &[Point], which: RingRef) -> Result<()> {
    let bad = |message: String| Error::InvalidDomain { ring: which, message };
    if ring.len() < 3 {
        return Err(bad(format!("ring needs at least 3 vertices, got {}", ring.len())));
    }
    let n = ring.len();
    for i in 0..n {
        if ring[i] == ring[(i + 1) % n] {
            return Err(bad(format!("repeated vertex at index {i}")));
        }
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // adjacent edges may only share their common vertex
                let folds = if j == i + 1 {
                    on_segment(d, a, b) || on_segment(a, c, d)
                } else {
                    on_segment(c, a, b) || on_segment(b, c, d)
                };
                if folds {
                    return Err(bad(format!("edges {i} and {j} overlap")));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(bad(format!("self-intersection between edges {i} and {j}")));
            }
        }
    }
    let area = signed_area2(ring);
    if area == 0.0 {
        return Err(bad("zero area".into()));
    }
    Ok(())
}

fn rings_touch(r1: &[Point], r2: &[Point]) -> bool {
    ring_edges(r1).any(|(a, b)| ring_edges(r2).any(|(c, d)| segments_intersect(a, b, c, d)))
}

fn validate(outer: &[Point], holes: &[Vec<Point>]) -> Result<()> {
    check_simple(outer, RingRef::Outer)?;
    if signed_area2(outer) < 0.0 {
        return Err(Error::InvalidDomain {
            ring: RingRef::Outer,
            message: "outer orientation must be counterclockwise".into(),
        });
    }
    for (k, h) in holes.iter().enumerate() {
        let which = RingRef::Hole(k);
        check_simple(h, which)?;
        if signed_area2(h) > 0.0 {
            return Err(Error::InvalidDomain {
                ring: which,
                message: "hole orientation must be clockwise".into(),
            });
        }
        if rings_touch(outer, h) || h.iter().any(|&p| ring_side(outer, p) != RingSide::Inside) {
            return Err(Error::InvalidDomain {
                ring: which,
                message: "hole is not strictly inside the outer ring (domain disconnected or degenerate)".into(),
            });
        }
        for (m, other) in holes.iter().enumerate().take(k) {
            if rings_touch(other, h)
                || ring_side(other, h[0]) != RingSide::Outside
                || ring_side(h, other[0]) != RingSide::Outside
            {
                return Err(Error::InvalidDomain {
                    ring: which,
                    message: format!("hole overlaps or touches hole {m} (domain disconnected or degenerate)"),
                });
            }
        }
    }
    Ok(())
}
