//! Shared fixtures for the benchmarks.

use domain_lab::{discretize, gallery, Grid, PolygonalDomain};

pub fn domain(name: &str) -> PolygonalDomain {
    gallery::make(name, &[]).expect("gallery entry").domain
}

pub fn grid(name: &str, h: f64) -> Grid {
    discretize(&domain(name), h).expect("grid")
}
