//! Travel-time geometry of the medium.
//!
//! Wave fronts of the damped system propagate along the geodesics of the
//! metric G = (K/rho)^-1. This module evaluates that metric (closed-form or
//! interpolated from cell coefficients), traces its rays by two independent
//! formulations, checks the geometric control condition by a deterministic
//! ray fan, and certifies that convex pockets without damping are escaped in
//! bounded time.

mod flow;
mod gcc;
mod hessian;
mod metric;

pub use flow::{
    geodesic_flow, hamiltonian_flow, GeodesicPath, PathExit, PathSample, RayStop,
};
pub use gcc::{check_gcc, GccConfig, GccReport, RayVerdict};
pub use hessian::{
    christoffel, disk_points, escape_certificate, hessian_report, metric_hessian,
    union_certified, ClosureField, EscapeCertificate, EscapeConfig, EscapeOutcome,
    FiniteDifferenceField, HessianReport, ScalarField,
};
pub use metric::{
    max_derivative_defect, AnalyticMetric, EuclideanMetric, HyperbolicMetric,
    InterpolatedMetric, Metric,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("metric is not positive definite at ({x}, {y})")]
    NotPositiveDefinite { x: f64, y: f64 },
    #[error("ray step size must be positive, got {got}")]
    NonPositiveStep { got: f64 },
    #[error("region contains no sample points")]
    EmptyRegion,
}
