use thiserror::Error;

/// Which ring of a domain an invariant violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingRef {
    Outer,
    Hole(usize),
}

impl std::fmt::Display for RingRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RingRef::Outer => write!(f, "outer ring"),
            RingRef::Hole(i) => write!(f, "hole {i}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid domain ({ring}): {message}")]
    InvalidDomain { ring: RingRef, message: String },

    #[error("point ({x}, {y}) is not inside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("empty grid at h = {h}: narrowest feature width is {narrowest_feature}")]
    EmptyGrid { h: f64, narrowest_feature: f64 },

    #[error("no grid node within h = {h} of ({x}, {y})")]
    SnapFailed { x: f64, y: f64, h: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("disconnected: {0}")]
    Disconnected(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("gradient energy vanishes; the quotient is undefined")]
    ZeroEnergy,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("localization failed for pair ({ax}, {ay}) -> ({bx}, {by}): {message}")]
    Localization {
        ax: f64,
        ay: f64,
        bx: f64,
        by: f64,
        message: String,
    },

    #[error("unknown gallery entry `{0}`")]
    UnknownEntry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
