//! CSV and SVG writers. Every CSV row carries `h`, `seed` and `version`
//! columns; floats use the shortest round-trip representation so identical
//! runs produce identical bytes.

use std::fmt::Write as _;
use std::io::Write;

use crate::conditions::ConditionEstimate;
use crate::domain::PolygonalDomain;
use crate::error::Result;
use crate::geom::Point;
use crate::grid::Grid;
use crate::localization::{LocalizationResult, LocalizationWitness};
use crate::poincare::{CertificateTable, InequalityCertificate};
use crate::VERSION;

/// Run provenance attached to every row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub h: f64,
    pub seed: u64,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn tail(p: Provenance) -> [String; 3] {
    [num(p.h), p.seed.to_string(), VERSION.to_string()]
}

pub const CONDITION_HEADER: [&str; 14] = [
    "domain",
    "condition",
    "constant",
    "sidedness",
    "sample_sidedness",
    "w0",
    "w1",
    "w2",
    "w3",
    "w4",
    "params",
    "h",
    "seed",
    "version",
];

pub fn write_conditions<W: Write>(
    out: W,
    domain: &str,
    rows: &[ConditionEstimate],
    prov: Provenance,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONDITION_HEADER)?;
    for e in rows {
        let c = e.witness.coords();
        let mut rec = vec![
            domain.to_string(),
            e.kind.to_string(),
            num(e.constant),
            e.sidedness.to_string(),
            e.sample_sidedness.map(|s| s.to_string()).unwrap_or_default(),
        ];
        rec.extend(c.iter().map(|&v| num(v)));
        rec.push(e.params.clone());
        rec.extend(tail(prov));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const LOCALIZATION_HEADER: [&str; 21] = [
    "domain",
    "x0",
    "y0",
    "r",
    "eps0",
    "case",
    "lambda",
    "c0",
    "z0x",
    "z0y",
    "region_nodes",
    "sandwich_ok",
    "john_ok",
    "john_constant",
    "min_curve_eps",
    "winners",
    "witnesses",
    "tol_disc",
    "h",
    "seed",
    "version",
];

fn witness_text(w: &LocalizationWitness) -> String {
    match w {
        LocalizationWitness::NotCovered(p) => format!("not_covered({} {})", p.x, p.y),
        LocalizationWitness::OutsideDilation(p) => format!("outside_dilation({} {})", p.x, p.y),
        LocalizationWitness::JohnFailure { x, c } => format!("john({} {} c={c})", x.x, x.y),
    }
}

/// One localization run.
#[derive(Debug, Clone, Copy)]
pub struct LocalizationRow<'a> {
    pub domain: &'a str,
    pub x0: Point,
    pub r: f64,
    pub eps0: f64,
    pub result: &'a LocalizationResult,
}

pub fn write_localizations<W: Write>(
    out: W,
    rows: &[LocalizationRow<'_>],
    prov: Provenance,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOCALIZATION_HEADER)?;
    for row in rows {
        let res = row.result;
        let winners = res
            .winners
            .iter()
            .map(|(l, c)| format!("{l}={c}"))
            .collect::<Vec<_>>()
            .join(";");
        let witnesses = res
            .witnesses
            .iter()
            .map(witness_text)
            .collect::<Vec<_>>()
            .join(";");
        let mut rec = vec![
            row.domain.to_string(),
            num(row.x0.x),
            num(row.x0.y),
            num(row.r),
            num(row.eps0),
            format!("{:?}", res.case).to_lowercase(),
            num(res.lambda),
            num(res.c0),
            num(res.z0.x),
            num(res.z0.y),
            res.region_size().to_string(),
            res.sandwich_ok.to_string(),
            res.john_ok.to_string(),
            opt(res.john_constant),
            num(res.min_curve_eps),
            winners,
            witnesses,
            num(crate::localization::TOL_DISC),
        ];
        rec.extend(tail(prov));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const CERTIFICATE_HEADER: [&str; 16] = [
    "domain",
    "p",
    "lambda",
    "x0",
    "y0",
    "r",
    "side",
    "constant",
    "test_function_id",
    "A",
    "center_index",
    "radius_index",
    "error",
    "h",
    "seed",
    "version",
];

fn certificate_record(domain: &str, c: &InequalityCertificate, prov: Provenance) -> Vec<String> {
    let mut rec = vec![
        domain.to_string(),
        num(c.p),
        num(c.lambda),
        num(c.x0.x),
        num(c.x0.y),
        num(c.r),
        c.side.to_string(),
        num(c.constant),
        c.test_function_id.clone(),
        opt(c.a),
        c.center_index.to_string(),
        c.radius_index.to_string(),
        c.error.clone().unwrap_or_default(),
    ];
    rec.extend(tail(prov));
    rec
}

pub fn write_certificates<W: Write>(
    out: W,
    domain: &str,
    table: &CertificateTable,
    prov: Provenance,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CERTIFICATE_HEADER)?;
    for c in &table.rows {
        w.write_record(certificate_record(domain, c, prov))?;
    }
    w.flush()?;
    Ok(())
}

pub const CAPACITY_HEADER: [&str; 11] = [
    "domain", "p", "cx", "cy", "rho", "R", "u_nodes", "v_nodes", "capacity", "h", "seed",
];

/// One capacity evaluation of an annular condenser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRow {
    pub p: f64,
    pub center: Point,
    pub rho: f64,
    pub big_r: f64,
    pub u_nodes: usize,
    pub v_nodes: usize,
    pub value: f64,
}

pub fn write_capacities<W: Write>(
    out: W,
    domain: &str,
    rows: &[CapacityRow],
    prov: Provenance,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CAPACITY_HEADER.to_vec();
    header.push("version");
    w.write_record(&header)?;
    for c in rows {
        let mut rec = vec![
            domain.to_string(),
            num(c.p),
            num(c.center.x),
            num(c.center.y),
            num(c.rho),
            num(c.big_r),
            c.u_nodes.to_string(),
            c.v_nodes.to_string(),
            num(c.value),
        ];
        rec.extend(tail(prov));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Maps domain coordinates to an SVG canvas with `y` pointing up.
struct Canvas {
    min: Point,
    scale: f64,
    height: f64,
    body: String,
}

const CANVAS: f64 = 480.0;
const MARGIN: f64 = 20.0;

impl Canvas {
    fn new(domain: &PolygonalDomain) -> Self {
        let (lo, hi) = domain.bounding_box();
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
        let scale = CANVAS / span;
        Self {
            min: lo,
            scale,
            height: (hi.y - lo.y) * scale,
            body: String::new(),
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale,
            MARGIN + self.height - (p.y - self.min.y) * self.scale,
        )
    }

    fn outline(&mut self, domain: &PolygonalDomain) {
        let mut d = String::new();
        for ring in domain.rings() {
            for (i, &p) in ring.iter().enumerate() {
                let (x, y) = self.map(p);
                let _ = write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" });
            }
            d.push_str("Z ");
        }
        let _ = writeln!(
            self.body,
            r##"<path d="{}" fill="#f4f4f4" fill-rule="evenodd" stroke="#222" stroke-width="1"/>"##,
            d.trim_end()
        );
    }

    fn circle(&mut self, c: Point, r: f64, style: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" {style}/>"#,
            r * self.scale
        );
    }

    fn square(&mut self, c: Point, side: f64, fill: &str) {
        let (x, y) = self.map(c);
        let s = side * self.scale;
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.3}" y="{:.3}" width="{s:.3}" height="{s:.3}" fill="{fill}"/>"#,
            x - s / 2.0,
            y - s / 2.0
        );
    }

    fn text(&mut self, x: f64, y: f64, t: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="monospace" font-size="11">{}</text>"#,
            escape(t)
        );
    }

    fn finish(self, title: &str) -> String {
        let w = CANVAS + 2.0 * MARGIN;
        let h = self.height + 2.0 * MARGIN + 20.0;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<title>{}</title>\n{}</svg>\n",
            escape(title),
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue (low) to red (high) on a log scale between `lo` and `hi`.
fn heat(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo && v.is_finite() {
        ((v.ln() - lo.ln()) / (hi.ln() - lo.ln())).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Certificate heat map: one disk per cell, colored by the cell's largest
/// valid lower bound, drawn largest radius first.
pub fn certificate_svg(domain: &PolygonalDomain, table: &CertificateTable, title: &str) -> String {
    let mut canvas = Canvas::new(domain);
    canvas.outline(domain);
    let mut cells: Vec<(usize, usize, Point, f64, f64)> = Vec::new();
    for c in &table.rows {
        if !(c.is_ok() && c.side == crate::poincare::CertificateSide::LowerBound) {
            continue;
        }
        match cells
            .iter_mut()
            .find(|e| e.0 == c.center_index && e.1 == c.radius_index)
        {
            Some(e) => e.4 = e.4.max(c.constant),
            None => cells.push((c.center_index, c.radius_index, c.x0, c.r, c.constant)),
        }
    }
    let positive: Vec<f64> = cells.iter().map(|c| c.4).filter(|&v| v > 0.0).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    cells.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)));
    for (_, _, x0, r, v) in &cells {
        let style = format!(
            r##"fill="{}" fill-opacity="0.45" stroke="#333" stroke-width="0.5""##,
            heat(*v, lo, hi)
        );
        canvas.circle(*x0, *r, &style);
    }
    let y = canvas.height + MARGIN + 16.0;
    canvas.text(MARGIN, y, &format!("max lower bound range [{lo:.4}, {hi:.4}]"));
    canvas.finish(title)
}

/// Localization overlay: region shaded, `z0` marked, sandwich circles drawn.
pub fn localization_svg(
    g: &Grid,
    res: &LocalizationResult,
    x0: Point,
    r: f64,
    title: &str,
) -> String {
    let domain = g.domain();
    let mut canvas = Canvas::new(domain);
    canvas.outline(domain);
    for n in res.region_nodes() {
        canvas.square(g.point(n), g.h(), "#7fb3d5");
    }
    canvas.circle(x0, r, r##"fill="none" stroke="#1a5276" stroke-width="1.5""##);
    canvas.circle(
        x0,
        res.lambda * r,
        r##"fill="none" stroke="#922b21" stroke-width="1" stroke-dasharray="4 3""##,
    );
    canvas.circle(res.z0, 0.006 * CANVAS / canvas.scale, r##"fill="#c0392b""##);
    let y = canvas.height + MARGIN + 16.0;
    canvas.text(
        MARGIN,
        y,
        &format!(
            "lambda={} c0={:.5} sandwich={} john={}",
            res.lambda, res.c0, res.sandwich_ok, res.john_ok
        ),
    );
    canvas.finish(title)
}

/// Domain outline only.
pub fn domain_svg(domain: &PolygonalDomain) -> String {
    let mut canvas = Canvas::new(domain);
    canvas.outline(domain);
    canvas.finish(&domain.name)
}

/// Reads a certificate CSV back into rows of `(x0, r, constant)` for valid
/// lower bounds, keyed by cell.
pub fn read_certificate_cells<R: std::io::Read>(input: R) -> Result<(String, CertificateTable)> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            crate::error::Error::InvalidParameter(format!("certificate CSV lacks column {name}"))
        })
    };
    let cols = [
        col("domain")?,
        col("p")?,
        col("lambda")?,
        col("x0")?,
        col("y0")?,
        col("r")?,
        col("side")?,
        col("constant")?,
        col("test_function_id")?,
        col("center_index")?,
        col("radius_index")?,
        col("error")?,
    ];
    let mut domain = String::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[cols[i]].parse::<f64>().map_err(|e| {
                crate::error::Error::InvalidParameter(format!("bad number {:?}: {e}", &rec[cols[i]]))
            })
        };
        let u = |i: usize| -> Result<usize> {
            rec[cols[i]].parse::<usize>().map_err(|e| {
                crate::error::Error::InvalidParameter(format!("bad index {:?}: {e}", &rec[cols[i]]))
            })
        };
        domain = rec[cols[0]].to_string();
        let side = match &rec[cols[6]] {
            "upper_estimate" => crate::poincare::CertificateSide::UpperEstimate,
            _ => crate::poincare::CertificateSide::LowerBound,
        };
        let error = rec[cols[11]].to_string();
        rows.push(InequalityCertificate {
            center_index: u(9)?,
            radius_index: u(10)?,
            p: f(1)?,
            x0: Point::new(f(3)?, f(4)?),
            r: f(5)?,
            lambda: f(2)?,
            side,
            constant: f(7)?,
            test_function_id: rec[cols[8]].to_string(),
            a: None,
            error: (!error.is_empty()).then_some(error),
        });
    }
    Ok((domain, CertificateTable { rows }))
}
