//! Numerical analysis of planar polygonal domains: geometric condition
//! constants, intrinsic and weighted geodesics, John localization and local
//! Sobolev-Poincare certificates.

pub mod conditions;
pub mod curve;
pub mod domain;
pub mod error;
pub mod gallery;
pub mod geom;
pub mod grid;
pub mod localization;
pub mod metric;
pub mod poincare;
pub mod report;

pub use conditions::{ConditionEstimate, ConditionKind, Sampler, Sidedness, Strategy, Witness};
pub use curve::Curve;
pub use domain::{DomainMeta, PolygonalDomain};
pub use error::{Error, Result, RingRef};
pub use gallery::{make as make_gallery_entry, Expected, Flag, GalleryEntry};
pub use geom::Point;
pub use grid::{discretize, Grid, NodeId};
pub use localization::{localize, verify_localization, LocalizationCase, LocalizationResult, LocalizationWitness};
pub use metric::{
    intrinsic_ball, intrinsic_distance, quasihyperbolic_distance, weighted_geodesic, GeodesicResult,
    IntrinsicBall, VisibilityGraph,
};

pub use poincare::{
    annulus_test_function, capacity, local_sp_functional, log_test_function, morrey_quotient,
    morrey_quotient_with_exponent, orlicz_norm,
    p_dirichlet_energy, poincare_constant_l2, poincare_quotient, sp_sweep, sweep_cells, trudinger_functional, CapacityProblem,
    CertificateSide, CertificateTable, DiscreteFunction, InequalityCertificate,
};
pub use report::Provenance;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
