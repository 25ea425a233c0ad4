//! Planar points, segments and exact-sign predicates.
//!
//! Orientation tests go through `robust::orient2d`, which evaluates the sign
//! of the 2x2 determinant with adaptive precision. Everything that decides
//! membership or intersection is built on that sign; distances stay in plain
//! binary64.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Collinear,
}

/// Exact sign of the turn `a -> b -> c`.
pub fn orient(a: Point, b: Point, c: Point) -> Orientation {
    let det = robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    );
    if det > 0.0 {
        Orientation::CounterClockwise
    } else if det < 0.0 {
        Orientation::Clockwise
    } else {
        Orientation::Collinear
    }
}

/// `p` lies on the closed segment `[a, b]`.
pub fn on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p) == Orientation::Collinear && within_box(p, a, b)
}

// Valid only once collinearity is known.
fn within_box(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segments `[a, b]` and `[c, d]` share at least one point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 != o2
        && o3 != o4
        && o1 != Orientation::Collinear
        && o2 != Orientation::Collinear
        && o3 != Orientation::Collinear
        && o4 != Orientation::Collinear
    {
        return true;
    }
    (o1 == Orientation::Collinear && within_box(c, a, b))
        || (o2 == Orientation::Collinear && within_box(d, a, b))
        || (o3 == Orientation::Collinear && within_box(a, c, d))
        || (o4 == Orientation::Collinear && within_box(b, c, d))
}

/// Interiors of the two segments cross transversally (no endpoint touching,
/// no collinear overlap).
pub fn segments_cross_properly(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 != Orientation::Collinear
        && o2 != Orientation::Collinear
        && o3 != Orientation::Collinear
        && o4 != Orientation::Collinear
        && o1 != o2
        && o3 != o4
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

pub fn segment_segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Twice the signed area (shoelace); positive for counterclockwise rings.
pub fn signed_area2(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum()
}

/// Iterator over the closed edges of a ring.
pub fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingSide {
    Inside,
    Outside,
    Boundary,
}

/// Crossing-number test with exact orientation signs.
pub fn ring_side(ring: &[Point], p: Point) -> RingSide {
    let mut inside = false;
    for (a, b) in ring_edges(ring) {
        if on_segment(p, a, b) {
            return RingSide::Boundary;
        }
        // half-open rule on y so shared vertices count once
        if (a.y > p.y) != (b.y > p.y) {
            let o = orient(a, b, p);
            let upward = b.y > a.y;
            if (upward && o == Orientation::CounterClockwise)
                || (!upward && o == Orientation::Clockwise)
            {
                inside = !inside;
            }
        }
    }
    if inside {
        RingSide::Inside
    } else {
        RingSide::Outside
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn ring_side_square() {
        let sq = square();
        assert_eq!(ring_side(&sq, Point::new(0.5, 0.5)), RingSide::Inside);
        assert_eq!(ring_side(&sq, Point::new(0.5, 0.0)), RingSide::Boundary);
        assert_eq!(ring_side(&sq, Point::new(1.0, 1.0)), RingSide::Boundary);
        assert_eq!(ring_side(&sq, Point::new(1.5, 0.5)), RingSide::Outside);
        // ray passes exactly through vertices
        assert_eq!(ring_side(&sq, Point::new(-0.5, 1.0)), RingSide::Outside);
        assert_eq!(ring_side(&sq, Point::new(-0.5, 0.0)), RingSide::Outside);
    }

    #[test]
    fn intersections() {
        let o = Point::new(0.0, 0.0);
        let a = Point::new(1.0, 1.0);
        let b = Point::new(0.0, 1.0);
        let c = Point::new(1.0, 0.0);
        assert!(segments_intersect(o, a, b, c));
        assert!(segments_cross_properly(o, a, b, c));
        // touching at an endpoint
        assert!(segments_intersect(o, a, a, c));
        assert!(!segments_cross_properly(o, a, a, c));
        // collinear overlap
        assert!(segments_intersect(o, c, Point::new(0.5, 0.0), Point::new(2.0, 0.0)));
        assert!(!segments_intersect(o, b, c, a));
    }

    #[test]
    fn distances() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 0.0);
        assert_eq!(point_segment_distance(Point::new(0.5, 0.25), a, b), 0.25);
        assert_eq!(point_segment_distance(Point::new(2.0, 0.0), a, b), 1.0);
        assert_eq!(
            segment_segment_distance(a, b, Point::new(0.0, 0.5), Point::new(1.0, 0.5)),
            0.5
        );
        assert!(signed_area2(&square()) > 0.0);
    }
}
