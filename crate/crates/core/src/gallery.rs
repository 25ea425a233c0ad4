//! Deterministic generators for the reference domains, each tagged with the
//! classification expected for the idealized shape it approximates.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::domain::{DomainMeta, PolygonalDomain};
use crate::error::{Error, Result};
use crate::geom::{signed_area2, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Yes => "yes",
            Flag::No => "no",
            Flag::Unknown => "unknown",
        })
    }
}

/// Expected local Sobolev-Poincare behaviour per exponent regime (n = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSp {
    pub below: Flag,
    pub critical: Flag,
    pub above: Flag,
}

impl LocalSp {
    fn all(f: Flag) -> Self {
        Self {
            below: f,
            critical: f,
            above: f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub uniform: Flag,
    pub john: Flag,
    /// `s` in the profile `beta(alpha) = 1 - s (1 - alpha)`; `s = 1` is the
    /// alpha-cigar case. `None` when no power profile is expected.
    pub cigar_profile: Option<f64>,
    pub slice: Flag,
    pub local_sp: LocalSp,
}

impl Expected {
    fn uniform_domain() -> Self {
        Self {
            uniform: Flag::Yes,
            john: Flag::Yes,
            cigar_profile: Some(1.0),
            slice: Flag::Yes,
            local_sp: LocalSp::all(Flag::Yes),
        }
    }

    /// `beta` expected for a given `alpha` under the cigar profile.
    pub fn cigar_beta(&self, alpha: f64) -> Option<f64> {
        self.cigar_profile.map(|s| 1.0 - s * (1.0 - alpha))
    }

    /// Checks the flags against the implication lattice: uniform implies
    /// John, and under the slice condition uniform is equivalent to local SP
    /// for p <= 2 while the alpha-cigar profile decides p > 2.
    pub fn is_consistent(&self) -> bool {
        use Flag::*;
        if self.uniform == Yes && self.john != Yes {
            return false;
        }
        if self.john == No && self.uniform != No {
            return false;
        }
        if self.slice == Yes {
            for f in [self.local_sp.below, self.local_sp.critical] {
                if (f == Yes && self.uniform == No) || (f == No && self.uniform == Yes) {
                    return false;
                }
            }
            match self.cigar_profile {
                Some(s) if s == 1.0 => {
                    if self.local_sp.above == No {
                        return false;
                    }
                }
                Some(_) => {
                    if self.local_sp.above == Yes {
                        return false;
                    }
                }
                None => {}
            }
        }
        if self.uniform == Yes && self.local_sp.above == No {
            return false;
        }
        true
    }

    fn class_tag(&self) -> &'static str {
        match (self.uniform, self.john) {
            (Flag::Yes, _) => "uniform",
            (Flag::No, Flag::Yes) => "john",
            (Flag::No, Flag::No) => "non_john",
            _ => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub domain: PolygonalDomain,
    pub expected: Expected,
    pub params: Vec<(&'static str, f64)>,
}

pub const NAMES: [&str; 8] = [
    "disk",
    "square",
    "rectangle",
    "slit_disk",
    "l_shape",
    "rooms_and_corridors",
    "power_cusp",
    "spiral",
];

pub const DEFAULT_SLIT_WIDTH: f64 = 1.0 / 64.0;

/// Builds a named entry. Missing parameters take their defaults; extra ones
/// are an error.
pub fn make(name: &str, params: &[f64]) -> Result<GalleryEntry> {
    let arg = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
    let max_params = match name {
        "square" | "l_shape" => 0,
        "disk" | "rectangle" | "power_cusp" => 1,
        "slit_disk" | "rooms_and_corridors" | "spiral" => 2,
        _ => return Err(Error::UnknownEntry(name.to_string())),
    };
    if params.len() > max_params {
        return Err(Error::InvalidParameter(format!(
            "{name} takes at most {max_params} parameters, got {}",
            params.len()
        )));
    }
    match name {
        "disk" => disk(count(arg(0, 64.0))?),
        "square" => square(),
        "rectangle" => rectangle(arg(0, 2.0)),
        "slit_disk" => slit_disk(arg(0, DEFAULT_SLIT_WIDTH), count(arg(1, 64.0))?),
        "l_shape" => l_shape(),
        "rooms_and_corridors" => rooms_and_corridors(count(arg(0, 3.0))?, arg(1, 1.0 / 8.0)),
        "power_cusp" => power_cusp(arg(0, 2.0)),
        "spiral" => spiral(arg(0, 2.0), arg(1, 0.7)),
        _ => unreachable!(),
    }
}

fn count(v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || v > 1e6 {
        return Err(Error::InvalidParameter(format!("expected a positive integer, got {v}")));
    }
    Ok(v as usize)
}

fn finish(
    name: &str,
    outer: Vec<Point>,
    expected: Expected,
    params: Vec<(&'static str, f64)>,
) -> Result<GalleryEntry> {
    let meta = DomainMeta {
        slice: match expected.slice {
            Flag::Yes => Some(true),
            Flag::No => Some(false),
            Flag::Unknown => None,
        },
        expected_class: Some(expected.class_tag().to_string()),
    };
    let domain = PolygonalDomain::new(outer, Vec::new(), name)?.with_meta(meta);
    Ok(GalleryEntry {
        domain,
        expected,
        params,
    })
}

/// Regular `m`-gon inscribed in the unit circle, one vertex at `(1, 0)`.
pub fn disk(m: usize) -> Result<GalleryEntry> {
    if m < 8 {
        return Err(Error::InvalidParameter(format!("disk needs at least 8 sides, got {m}")));
    }
    let outer = (0..m)
        .map(|k| {
            let t = TAU * k as f64 / m as f64;
            Point::new(t.cos(), t.sin())
        })
        .collect();
    finish("disk", outer, Expected::uniform_domain(), vec![("m", m as f64)])
}

pub fn square() -> Result<GalleryEntry> {
    rect_entry("square", 1.0, vec![])
}

/// `[0, aspect] x [0, 1]`.
pub fn rectangle(aspect: f64) -> Result<GalleryEntry> {
    if !(aspect > 0.0 && aspect <= 64.0) {
        return Err(Error::InvalidParameter(format!("aspect must be in (0, 64], got {aspect}")));
    }
    rect_entry("rectangle", aspect, vec![("aspect", aspect)])
}

fn rect_entry(name: &str, a: f64, params: Vec<(&'static str, f64)>) -> Result<GalleryEntry> {
    let outer = vec![
        Point::new(0.0, 0.0),
        Point::new(a, 0.0),
        Point::new(a, 1.0),
        Point::new(0.0, 1.0),
    ];
    finish(name, outer, Expected::uniform_domain(), params)
}

/// Unit `m`-gon with the notch `{0 <= x, |y| <= w/2}` removed: the radial
/// slit along the positive x-axis, thickened to width `w`.
pub fn slit_disk(w: f64, m: usize) -> Result<GalleryEntry> {
    if m < 8 {
        return Err(Error::InvalidParameter(format!("slit disk needs at least 8 sides, got {m}")));
    }
    let step = TAU / m as f64;
    if !(w > 0.0 && w / 2.0 < step.sin() * 0.5) {
        return Err(Error::InvalidParameter(format!(
            "slit width must be in (0, {}) for m = {m}, got {w}",
            step.sin()
        )));
    }
    // the notch meets the first polygon edge where y = w/2
    let edge_x = |y: f64| {
        // edge from (1, 0) to (cos step, sin step)
        let t = y / step.sin();
        1.0 + t * (step.cos() - 1.0)
    };
    let xe = edge_x(w / 2.0);
    let mut outer = vec![Point::new(xe, w / 2.0)];
    for k in 1..m {
        let t = step * k as f64;
        outer.push(Point::new(t.cos(), t.sin()));
    }
    outer.push(Point::new(xe, -w / 2.0));
    outer.push(Point::new(0.0, -w / 2.0));
    outer.push(Point::new(0.0, w / 2.0));
    let expected = Expected {
        uniform: Flag::No,
        john: Flag::Yes,
        cigar_profile: None,
        slice: Flag::Yes,
        local_sp: LocalSp::all(Flag::No),
    };
    finish("slit_disk", outer, expected, vec![("w", w), ("m", m as f64)])
}

/// Unit square minus the upper-right quadrant `[1/2, 1]^2`.
pub fn l_shape() -> Result<GalleryEntry> {
    let outer = vec![
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 0.5),
        Point::new(0.5, 0.5),
        Point::new(0.5, 1.0),
        Point::new(0.0, 1.0),
    ];
    finish("l_shape", outer, Expected::uniform_domain(), vec![])
}

pub const ROOM_SIDE: f64 = 0.5;
pub const CORRIDOR_LENGTH: f64 = 0.25;

/// `k` square rooms of side 1/2 in a row along the x-axis, consecutive rooms
/// joined by corridors of length 1/4 and width `neck`, centred at `y = 1/4`.
pub fn rooms_and_corridors(k: usize, neck: f64) -> Result<GalleryEntry> {
    if !(1..=16).contains(&k) {
        return Err(Error::InvalidParameter(format!("room count must be in 1..=16, got {k}")));
    }
    if !(neck > 0.0 && neck < ROOM_SIDE) {
        return Err(Error::InvalidParameter(format!("neck width must be in (0, 1/2), got {neck}")));
    }
    let pitch = ROOM_SIDE + CORRIDOR_LENGTH;
    let (lo, hi) = (0.25 - neck / 2.0, 0.25 + neck / 2.0);
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    for i in 0..k {
        let x0 = pitch * i as f64;
        let x1 = x0 + ROOM_SIDE;
        if i > 0 {
            bottom.push(Point::new(x0, lo));
            top.push(Point::new(x0, hi));
        }
        bottom.push(Point::new(x0, 0.0));
        bottom.push(Point::new(x1, 0.0));
        top.push(Point::new(x0, ROOM_SIDE));
        top.push(Point::new(x1, ROOM_SIDE));
        if i + 1 < k {
            bottom.push(Point::new(x1, lo));
            top.push(Point::new(x1, hi));
        }
    }
    let mut outer = bottom;
    outer.extend(top.into_iter().rev());
    finish(
        "rooms_and_corridors",
        outer,
        Expected::uniform_domain(),
        vec![("k", k as f64), ("neck", neck)],
    )
}

/// Outward cusp `{0 < x < 1, |y| < x^s}` sampled densely near the tip.
pub fn power_cusp(s: f64) -> Result<GalleryEntry> {
    if !(s >= 1.0 && s <= 4.0) {
        return Err(Error::InvalidParameter(format!("cusp exponent must be in [1, 4], got {s}")));
    }
    const M: usize = 96;
    let xs: Vec<f64> = (1..=M).map(|k| (k as f64 / M as f64).powi(2)).collect();
    let mut outer = vec![Point::new(0.0, 0.0)];
    outer.extend(xs.iter().map(|&x| Point::new(x, -x.powf(s))));
    outer.extend(xs.iter().rev().map(|&x| Point::new(x, x.powf(s))));
    let (uniform, john, local) = if s > 1.0 {
        (Flag::No, Flag::No, LocalSp::all(Flag::No))
    } else {
        (Flag::Yes, Flag::Yes, LocalSp::all(Flag::Yes))
    };
    let expected = Expected {
        uniform,
        john,
        cigar_profile: Some(s),
        slice: Flag::Yes,
        local_sp: local,
    };
    finish("power_cusp", outer, expected, vec![("s", s)])
}

/// Spiral channel winding inward `turns` times; its width shrinks by the
/// factor `gap_decay` per turn.
pub fn spiral(turns: f64, gap_decay: f64) -> Result<GalleryEntry> {
    if !(turns >= 0.5 && turns <= 4.0) {
        return Err(Error::InvalidParameter(format!("turns must be in [0.5, 4], got {turns}")));
    }
    if !(gap_decay > 0.0 && gap_decay <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gap decay must be in (0, 1], got {gap_decay}"
        )));
    }
    const W0: f64 = 0.08;
    let total = TAU * turns;
    let pitch = 0.8 / turns.max(1.0);
    let radius = |t: f64| 1.0 - pitch * t / TAU;
    let width = |t: f64| W0 * gap_decay.powf(t / TAU);
    let m = (48.0 * turns).ceil() as usize;
    let thetas: Vec<f64> = (0..=m).map(|k| total * k as f64 / m as f64).collect();
    // inner edge points sit on chords, so push them slightly to keep the
    // channel simple across turns
    let shrink = (PI / 48.0).cos();
    let mut outer: Vec<Point> = thetas
        .iter()
        .map(|&t| {
            let r = radius(t) + width(t) / 2.0;
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect();
    outer.extend(thetas.iter().rev().map(|&t| {
        let r = (radius(t) - width(t) / 2.0) * shrink.max(0.99);
        Point::new(r * t.cos(), r * t.sin())
    }));
    if signed_area2(&outer) < 0.0 {
        outer.reverse();
    }
    let expected = Expected {
        uniform: Flag::Unknown,
        john: Flag::Unknown,
        cigar_profile: None,
        slice: Flag::Yes,
        local_sp: LocalSp::all(Flag::Unknown),
    };
    finish(
        "spiral",
        outer,
        expected,
        vec![("turns", turns), ("gap_decay", gap_decay)],
    )
}

/// CSV manifest of the default gallery with the expected flags.
pub fn write_manifest<W: std::io::Write>(out: W, version: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "name",
        "params",
        "uniform",
        "john",
        "cigar_profile_s",
        "slice",
        "local_sp_p_lt_2",
        "local_sp_p_eq_2",
        "local_sp_p_gt_2",
        "version",
    ])?;
    for name in NAMES {
        let e = make(name, &[])?;
        let params = e
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let x = &e.expected;
        w.write_record([
            name.to_string(),
            params,
            x.uniform.to_string(),
            x.john.to_string(),
            x.cigar_profile.map(|s| s.to_string()).unwrap_or_default(),
            x.slice.to_string(),
            x.local_sp.below.to_string(),
            x.local_sp.critical.to_string(),
            x.local_sp.above.to_string(),
            version.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_valid_and_roundtrips() {
        for name in NAMES {
            let e = make(name, &[]).unwrap();
            assert!(e.expected.is_consistent(), "{name}");
            let text = e.domain.serialize();
            let back = PolygonalDomain::parse(&text).unwrap();
            assert_eq!(back, e.domain, "{name}");
            assert_eq!(make(name, &[]).unwrap(), e, "{name} not deterministic");
        }
    }

    #[test]
    fn slit_disk_flags() {
        let e = make("slit_disk", &[1.0 / 64.0, 64.0]).unwrap();
        assert_eq!(e.expected.uniform, Flag::No);
        assert_eq!(e.expected.john, Flag::Yes);
        assert_eq!(e.expected.slice, Flag::Yes);
        assert_eq!(e.expected.local_sp, LocalSp::all(Flag::No));
    }

    #[test]
    fn disk_flags() {
        let e = make("disk", &[64.0]).unwrap();
        assert_eq!(e.expected.uniform, Flag::Yes);
        assert_eq!(e.expected.local_sp, LocalSp::all(Flag::Yes));
    }

    #[test]
    fn cusp_profile() {
        let e = make("power_cusp", &[2.0]).unwrap();
        assert_eq!(e.expected.cigar_beta(0.75), Some(0.5));
        assert!((e.expected.cigar_beta(2.0 / 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.expected.uniform, Flag::No);
    }

    #[test]
    fn bad_requests() {
        assert!(matches!(make("snowflake", &[]), Err(Error::UnknownEntry(_))));
        assert!(make("slit_disk", &[0.0]).is_err());
        assert!(make("disk", &[3.5]).is_err());
        assert!(make("square", &[1.0]).is_err());
        assert!(make("rooms_and_corridors", &[3.0, 0.6]).is_err());
    }

    #[test]
    fn inconsistent_flags_detected() {
        let mut x = Expected::uniform_domain();
        x.john = Flag::No;
        assert!(!x.is_consistent());
    }

    #[test]
    fn manifest_lists_all() {
        let mut buf = Vec::new();
        write_manifest(&mut buf, "0").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), NAMES.len() + 1);
    }
}
