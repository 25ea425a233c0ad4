//! Command-line front end for domain-lab.
//!
//! `run` parses an argument list, executes one command and returns the
//! process exit code: 0 on success, 1 on domain or configuration errors,
//! 2 when a numeric solver fails to converge.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use domain_lab::conditions::{self, Sampler};
use domain_lab::report::{self, CapacityRow, LocalizationRow, Provenance};
use domain_lab::{gallery, poincare, CertificateSide, Grid, Point, PolygonalDomain};

pub const THREADS_ENV: &str = "DOMAIN_LAB_THREADS";

pub const USAGE: &str = "usage: domain-lab <analyze|localize|sp|capacity|gallery|report> [path] \
[--h R] [--p F] [--lambda F] [--alpha F] [--beta F] [--x0 X Y] [--r F] [--eps0 F] [--seed N] \
[--sweep] [--emit DIR] [--out DIR]";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}\n{USAGE}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Domain {
        path: PathBuf,
        #[source]
        source: domain_lab::Error,
    },
    #[error(transparent)]
    Core(#[from] domain_lab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(domain_lab::Error::NonConvergence { .. })
            | CliError::Domain {
                source: domain_lab::Error::NonConvergence { .. },
                ..
            } => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Localize,
    Sp,
    Capacity,
    Gallery,
    Report,
}

impl std::str::FromStr for Command {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "analyze" => Command::Analyze,
            "localize" => Command::Localize,
            "sp" => Command::Sp,
            "capacity" => Command::Capacity,
            "gallery" => Command::Gallery,
            "report" => Command::Report,
            other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Analyze => "analyze",
            Command::Localize => "localize",
            Command::Sp => "sp",
            Command::Capacity => "capacity",
            Command::Gallery => "gallery",
            Command::Report => "report",
        })
    }
}

/// Parses a positive number written as a decimal or as a ratio `a/b`.
pub fn parse_spacing(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("bad number {s:?}: {e}"))?,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("spacing must be positive and finite, got {s:?}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "domain-lab", version, about = "Planar domain analysis toolkit")]
#[command(allow_negative_numbers = true)]
struct Args {
    /// analyze | localize | sp | capacity | gallery | report
    command: String,
    /// Domain file; for `gallery`, an entry name with optional `:a,b` parameters.
    path: Option<String>,
    /// Grid spacing, decimal or ratio such as 1/256 [default: 1/128].
    #[arg(long, value_parser = parse_spacing)]
    h: Option<f64>,
    /// Sobolev exponent [default: 2].
    #[arg(long)]
    p: Option<f64>,
    /// Ball dilation; for `capacity` the outer plate radius is lambda * r [default: 2].
    #[arg(long)]
    lambda: Option<f64>,
    /// Cigar and carrot order [default: 0.5].
    #[arg(long)]
    alpha: Option<f64>,
    /// Cigar exponent [default: alpha].
    #[arg(long)]
    beta: Option<f64>,
    /// Ball center.
    #[arg(long, num_args = 2, value_names = ["X", "Y"])]
    x0: Option<Vec<f64>>,
    /// Ball radius; for `capacity` the inner plate radius.
    #[arg(long)]
    r: Option<f64>,
    /// Uniformity parameter of the localization [default: 1].
    #[arg(long)]
    eps0: Option<f64>,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run `sp` over the default 5 x 4 cell sweep.
    #[arg(long)]
    sweep: bool,
    /// Directory for `gallery` domain files.
    #[arg(long)]
    emit: Option<PathBuf>,
    /// Output directory [default: .].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Validated configuration of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub domain_path: Option<String>,
    pub h: f64,
    pub p: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub x0: Option<Point>,
    pub r: Option<f64>,
    pub eps0: f64,
    pub seed: u64,
    pub sweep: bool,
    pub emit: Option<PathBuf>,
    pub output_dir: PathBuf,
}

pub const DEFAULT_H: f64 = 1.0 / 128.0;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const SWEEP_CENTERS: usize = 5;
pub const SWEEP_RADII: usize = 4;

impl RunConfig {
    pub fn from_args<I, T>(argv: I) -> CliResult<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let a = Args::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
        let command: Command = a.command.parse()?;
        let cfg = RunConfig {
            command,
            domain_path: a.path,
            h: a.h.unwrap_or(DEFAULT_H),
            p: a.p.unwrap_or(2.0),
            lambda: a.lambda.unwrap_or(poincare::DEFAULT_LAMBDA),
            alpha: a.alpha.unwrap_or(DEFAULT_ALPHA),
            beta: a.beta,
            x0: a.x0.map(|v| Point::new(v[0], v[1])),
            r: a.r,
            eps0: a.eps0.unwrap_or(1.0),
            seed: a.seed,
            sweep: a.sweep,
            emit: a.emit,
            output_dir: a.out.unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.p.is_finite() && self.p >= 1.0) {
            return bad(format!("--p must be >= 1, got {}", self.p));
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return bad(format!("--lambda must be >= 1, got {}", self.lambda));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("--alpha must be >= 0, got {}", self.alpha));
        }
        if let Some(r) = self.r {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("--r must be positive, got {r}"));
            }
        }
        if !(self.eps0 > 0.0 && self.eps0 <= 1.0) {
            return bad(format!("--eps0 must lie in (0, 1], got {}", self.eps0));
        }
        if self.command != Command::Gallery && self.domain_path.is_none() {
            return Err(CliError::Usage(format!("`{}` needs a domain path", self.command)));
        }
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            h: self.h,
            seed: self.seed,
        }
    }
}

/// Runs one invocation and returns the exit code. Errors go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    if argv
        .iter()
        .skip(1)
        .any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V")
    {
        return match Args::try_parse_from(&argv) {
            Err(e) if !e.use_stderr() => {
                let _ = e.print();
                0
            }
            _ => {
                eprintln!("{USAGE}");
                1
            }
        };
    }
    let mut log = String::new();
    let outcome = RunConfig::from_args(argv).and_then(|cfg| execute(&cfg, &mut log));
    let _ = std::io::stdout().write_all(log.as_bytes());
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("domain-lab: {e}");
            e.exit_code()
        }
    }
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Executes a validated configuration, appending a short summary to `log`.
pub fn execute(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.command {
        Command::Analyze => analyze(cfg, log),
        Command::Localize => localize(cfg, log),
        Command::Sp => sp(cfg, log),
        Command::Capacity => capacity(cfg, log),
        Command::Gallery => gallery_cmd(cfg, log),
        Command::Report => report_cmd(cfg, log),
    })
}

fn say(log: &mut String, line: String) -> CliResult<()> {
    log.push_str(&line);
    log.push('\n');
    Ok(())
}

fn load_domain(path: &str) -> CliResult<(PolygonalDomain, String)> {
    let p = Path::new(path);
    let text = fs::read_to_string(p).map_err(|source| CliError::File {
        path: p.to_path_buf(),
        source,
    })?;
    let d = PolygonalDomain::parse(&text).map_err(|source| CliError::Domain {
        path: p.to_path_buf(),
        source,
    })?;
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| d.name.clone());
    Ok((d, stem))
}

fn output_file(cfg: &RunConfig, name: String) -> CliResult<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).map_err(|source| CliError::File {
        path: cfg.output_dir.clone(),
        source,
    })?;
    Ok(cfg.output_dir.join(name))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn deepest(g: &Grid) -> Point {
    let n = (0..g.len() as u32)
        .max_by(|&a, &b| g.dist(a).total_cmp(&g.dist(b)).then(b.cmp(&a)))
        .expect("grids are nonempty");
    g.point(n)
}

fn analyze(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let (d, stem) = load_domain(cfg.domain_path.as_deref().unwrap_or_default())?;
    let g = domain_lab::discretize(&d, cfg.h)?;
    let s = Sampler {
        seed: cfg.seed,
        ..Sampler::default()
    };
    let center = cfg.x0.unwrap_or_else(|| deepest(&g));
    let beta = cfg.beta.unwrap_or(cfg.alpha);
    let rows = vec![
        conditions::quasiconvexity_constant(&g, &s)?,
        conditions::uniformity_estimate(&g, &s)?,
        conditions::john_estimate(&g, center, &s)?,
        conditions::llc2_estimate(&g, &s)?,
        conditions::cigar_constant(&g, cfg.alpha, beta, &s)?,
        conditions::carrot_constant(&g, cfg.alpha, center, &s)?,
        conditions::ahlfors_constant(&g, false, &s)?,
        conditions::ahlfors_constant(&g, true, &s)?,
    ];
    let path = output_file(cfg, format!("{stem}.conditions.csv"))?;
    let mut buf = Vec::new();
    report::write_conditions(&mut buf, &d.name, &rows, cfg.provenance())?;
    write_file(&path, &buf)?;
    write_file(&output_file(cfg, format!("{stem}.svg"))?, report::domain_svg(&d).as_bytes())?;
    for e in &rows {
        say(log, format!("{:<20} {:<12.6} {}", e.kind.to_string(), e.constant, e.sidedness))?;
    }
    say(log, format!("wrote {}", path.display()))
}

fn require_x0_r(cfg: &RunConfig) -> CliResult<(Point, f64)> {
    match (cfg.x0, cfg.r) {
        (Some(x), Some(r)) => Ok((x, r)),
        _ => Err(CliError::Usage(format!("`{}` needs --x0 X Y and --r F", cfg.command))),
    }
}

fn localize(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let (d, stem) = load_domain(cfg.domain_path.as_deref().unwrap_or_default())?;
    let (x0, r) = require_x0_r(cfg)?;
    let g = domain_lab::discretize(&d, cfg.h)?;
    let built = domain_lab::localize(&g, x0, r, cfg.eps0)?;
    let res = domain_lab::verify_localization(&g, built, x0, r)?;
    let row = LocalizationRow {
        domain: &d.name,
        x0,
        r,
        eps0: cfg.eps0,
        result: &res,
    };
    let path = output_file(cfg, format!("{stem}.localization.csv"))?;
    let mut buf = Vec::new();
    report::write_localizations(&mut buf, &[row], cfg.provenance())?;
    write_file(&path, &buf)?;
    let svg = report::localization_svg(&g, &res, x0, r, &format!("{} localization", d.name));
    write_file(&output_file(cfg, format!("{stem}.localization.svg"))?, svg.as_bytes())?;
    say(
        log,
        format!(
            "lambda={} c0={} sandwich_ok={} john_ok={} john_constant={}",
            res.lambda,
            res.c0,
            res.sandwich_ok,
            res.john_ok,
            res.john_constant.map(|c| c.to_string()).unwrap_or_else(|| "-".into())
        ),
    )?;
    say(log, format!("wrote {}", path.display()))
}

fn sp(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let (d, stem) = load_domain(cfg.domain_path.as_deref().unwrap_or_default())?;
    let g = domain_lab::discretize(&d, cfg.h)?;
    let (centers, radii) = if cfg.sweep {
        poincare::sweep_cells(&g, cfg.seed, SWEEP_CENTERS, SWEEP_RADII)
    } else {
        let (x0, r) = require_x0_r(cfg)?;
        (vec![x0], vec![r])
    };
    let table = domain_lab::sp_sweep(&g, cfg.p, &centers, &radii, cfg.lambda)?;
    let path = output_file(cfg, format!("{stem}.certificates.csv"))?;
    let mut buf = Vec::new();
    report::write_certificates(&mut buf, &d.name, &table, cfg.provenance())?;
    write_file(&path, &buf)?;
    let svg = report::certificate_svg(&d, &table, &format!("{} p={}", d.name, cfg.p));
    write_file(&output_file(cfg, format!("{stem}.certificates.svg"))?, svg.as_bytes())?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    say(
        log,
        format!(
            "cells={} rows={} max_lower_poincare={} max_lower_sp={} min_upper={}",
            centers.len() * radii.len(),
            table.rows.len(),
            fmt(table.max_lower("poincare")),
            fmt(table.max_lower("sp")),
            fmt(table.min_upper())
        ),
    )?;
    let failed = table
        .rows
        .iter()
        .filter(|c| c.side == CertificateSide::LowerBound && !c.is_ok())
        .count();
    if failed > 0 {
        say(log, format!("{failed} lower-bound rows recorded an error"))?;
    }
    say(log, format!("wrote {}", path.display()))
}

fn capacity(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let (d, stem) = load_domain(cfg.domain_path.as_deref().unwrap_or_default())?;
    let g = domain_lab::discretize(&d, cfg.h)?;
    let rho = cfg
        .r
        .ok_or_else(|| CliError::Usage("`capacity` needs --r (inner radius)".into()))?;
    if !(cfg.lambda > 1.0) {
        return Err(CliError::Config("`capacity` needs --lambda > 1 (outer radius = lambda * r)".into()));
    }
    let center = cfg.x0.unwrap_or_else(|| deepest(&g));
    let big_r = cfg.lambda * rho;
    let prob = domain_lab::CapacityProblem::annulus(&g, center, rho, big_r, cfg.p)?;
    let value = domain_lab::capacity(&g, &prob)?;
    let row = CapacityRow {
        p: cfg.p,
        center,
        rho,
        big_r,
        u_nodes: prob.u_set.len(),
        v_nodes: prob.v_set.len(),
        value,
    };
    let path = output_file(cfg, format!("{stem}.capacity.csv"))?;
    let mut buf = Vec::new();
    report::write_capacities(&mut buf, &d.name, &[row], cfg.provenance())?;
    write_file(&path, &buf)?;
    say(log, format!("capacity={value} rho={rho} R={big_r} p={}", cfg.p))?;
    say(log, format!("wrote {}", path.display()))
}

/// `name` or `name:a,b,...`.
fn parse_entry(spec: &str) -> CliResult<(String, Vec<f64>)> {
    match spec.split_once(':') {
        None => Ok((spec.to_string(), Vec::new())),
        Some((name, rest)) => {
            let params = rest
                .split(',')
                .map(|t| parse_spacing(t).or_else(|_| t.trim().parse::<f64>().map_err(|e| e.to_string())))
                .collect::<std::result::Result<Vec<f64>, String>>()
                .map_err(|e| CliError::Config(format!("gallery parameters {rest:?}: {e}")))?;
            Ok((name.to_string(), params))
        }
    }
}

fn gallery_cmd(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let Some(spec) = cfg.domain_path.as_deref() else {
        let path = output_file(cfg, "gallery.csv".into())?;
        let mut buf = Vec::new();
        gallery::write_manifest(&mut buf, domain_lab::VERSION)?;
        write_file(&path, &buf)?;
        return say(log, format!("wrote {}", path.display()));
    };
    let (name, params) = parse_entry(spec)?;
    let entry = gallery::make(&name, &params)?;
    let text = entry.domain.serialize();
    match &cfg.emit {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::File {
                path: dir.clone(),
                source,
            })?;
            let path = dir.join(format!("{name}.dom"));
            write_file(&path, text.as_bytes())?;
            say(log, format!("wrote {}", path.display()))
        }
        None => say(log, text.trim_end().to_string()),
    }
}

fn report_cmd(cfg: &RunConfig, log: &mut String) -> CliResult<()> {
    let (d, stem) = load_domain(cfg.domain_path.as_deref().unwrap_or_default())?;
    let mut wrote = Vec::new();
    let domain_svg = output_file(cfg, format!("{stem}.svg"))?;
    write_file(&domain_svg, report::domain_svg(&d).as_bytes())?;
    wrote.push(domain_svg);
    let certs = cfg.output_dir.join(format!("{stem}.certificates.csv"));
    if certs.exists() {
        let file = fs::File::open(&certs).map_err(|source| CliError::File {
            path: certs.clone(),
            source,
        })?;
        let (name, table) = report::read_certificate_cells(file).map_err(|source| CliError::Domain {
            path: certs.clone(),
            source,
        })?;
        let svg = report::certificate_svg(&d, &table, &format!("{name} certificates"));
        let out = output_file(cfg, format!("{stem}.report.svg"))?;
        write_file(&out, svg.as_bytes())?;
        wrote.push(out);
    }
    for p in wrote {
        say(log, format!("wrote {}", p.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_accepts_ratios() {
        assert_eq!(parse_spacing("1/256").unwrap(), 1.0 / 256.0);
        assert_eq!(parse_spacing("0.25").unwrap(), 0.25);
        assert!(parse_spacing("1/0").is_err());
        assert!(parse_spacing("-1/8").is_err());
        assert!(parse_spacing("x").is_err());
    }

    #[test]
    fn config_defaults() {
        let c = RunConfig::from_args(["domain-lab", "sp", "a.dom"]).unwrap();
        assert_eq!(c.h, DEFAULT_H);
        assert_eq!(c.p, 2.0);
        assert_eq!(c.lambda, 2.0);
        assert_eq!(c.seed, 0);
        assert_eq!(c.output_dir, PathBuf::from("."));
    }

    #[test]
    fn negative_coordinates_parse() {
        let c = RunConfig::from_args(["domain-lab", "localize", "a.dom", "--x0", "-0.4", "0.4", "--r", "0.1"]).unwrap();
        assert_eq!(c.x0, Some(Point::new(-0.4, 0.4)));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for argv in [
            vec!["domain-lab", "sp", "a.dom", "--p", "0.5"],
            vec!["domain-lab", "sp", "a.dom", "--lambda", "0.9"],
            vec!["domain-lab", "localize", "a.dom", "--eps0", "2"],
        ] {
            assert!(matches!(RunConfig::from_args(argv), Err(CliError::Config(_))));
        }
        assert!(matches!(
            RunConfig::from_args(["domain-lab", "frobnicate"]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn entry_parameters() {
        assert_eq!(parse_entry("disk").unwrap(), ("disk".into(), vec![]));
        assert_eq!(
            parse_entry("slit_disk:1/32,64").unwrap(),
            ("slit_disk".into(), vec![1.0 / 32.0, 64.0])
        );
    }

    #[test]
    fn non_convergence_exits_with_two() {
        let e = CliError::Core(domain_lab::Error::NonConvergence {
            iterations: 10,
            residual: 1.0,
        });
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(domain_lab::Error::ZeroEnergy).exit_code(), 1);
    }
}
