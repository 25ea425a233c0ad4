//! Arclength-parametrized polylines.

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curve {
    vertices: Vec<Point>,
    cumulative: Vec<f64>,
}

impl Curve {
    /// Builds a polyline, dropping consecutive duplicate vertices so that the
    /// cumulative length is strictly increasing.
    pub fn new(points: impl IntoIterator<Item = Point>) -> Self {
        let mut vertices: Vec<Point> = Vec::new();
        let mut cumulative = Vec::new();
        for p in points {
            match vertices.last() {
                None => {
                    vertices.push(p);
                    cumulative.push(0.0);
                }
                Some(&q) if q != p => {
                    let s = cumulative.last().copied().unwrap_or(0.0) + q.dist(p);
                    vertices.push(p);
                    cumulative.push(s);
                }
                _ => {}
            }
        }
        Self { vertices, cumulative }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cumulative_length(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start(&self) -> Option<Point> {
        self.vertices.first().copied()
    }

    pub fn end(&self) -> Option<Point> {
        self.vertices.last().copied()
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn reversed(&self) -> Curve {
        Curve::new(self.vertices.iter().rev().copied())
    }

    /// Point at arclength `s`, clamped to `[0, length]`.
    pub fn point_at(&self, s: f64) -> Point {
        let n = self.vertices.len();
        if n == 0 {
            return Point::default();
        }
        if n == 1 || s <= 0.0 {
            return self.vertices[0];
        }
        if s >= self.length() {
            return self.vertices[n - 1];
        }
        let i = self.cumulative.partition_point(|&c| c <= s).clamp(1, n - 1);
        let (s0, s1) = (self.cumulative[i - 1], self.cumulative[i]);
        self.vertices[i - 1].lerp(self.vertices[i], (s - s0) / (s1 - s0))
    }

    /// Portion between arclengths `s0 <= s1`.
    pub fn subcurve(&self, s0: f64, s1: f64) -> Result<Curve> {
        if !(s0 <= s1) || s0 < 0.0 || s1 > self.length() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "subcurve range [{s0}, {s1}] outside [0, {}]",
                self.length()
            )));
        }
        let mut pts = vec![self.point_at(s0)];
        for (v, &c) in self.vertices.iter().zip(&self.cumulative) {
            if c > s0 && c < s1 {
                pts.push(*v);
            }
        }
        pts.push(self.point_at(s1));
        Ok(Curve::new(pts))
    }

    /// `(arclength, point)` samples with spacing at most `step`, always
    /// including every vertex.
    pub fn samples(&self, step: f64) -> Vec<(f64, Point)> {
        let mut out = Vec::new();
        let n = self.vertices.len();
        if n == 0 {
            return out;
        }
        out.push((0.0, self.vertices[0]));
        for i in 1..n {
            let (a, b) = (self.vertices[i - 1], self.vertices[i]);
            let seg = self.cumulative[i] - self.cumulative[i - 1];
            let k = (seg / step).ceil().max(1.0) as usize;
            for j in 1..=k {
                let t = j as f64 / k as f64;
                let p = if j == k { b } else { a.lerp(b, t) };
                out.push((self.cumulative[i - 1] + t * seg, p));
            }
        }
        out
    }

    /// `∫ w(z) |dz|` by the midpoint rule on every segment.
    pub fn integrate(&self, w: impl Fn(Point) -> f64) -> f64 {
        self.vertices
            .windows(2)
            .map(|s| s[0].dist(s[1]) * w(s[0].midpoint(s[1])))
            .sum()
    }
}
