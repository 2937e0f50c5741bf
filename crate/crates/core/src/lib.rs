//! Numerical toolkit for a pair of wave fields with cubic mutual coupling
//! and viscoelastic (strain-rate) damping supported on part of the domain.
//!
//! The crate covers the full workflow:
//!
//! * grids, material coefficients and states ([`grid`], [`coeffs`], [`state`]);
//! * assembly of the spatial operators and an SPD solver ([`sparse`], [`operators`]);
//! * implicit time stepping with an energy-exact midpoint scheme ([`evolution`]);
//! * the energy balance, decay-rate fits and observability ratios ([`energy`]);
//! * travel-time geometry: ray tracing, a damping-region coverage check and
//!   convexity certificates ([`geometry`]).
//!
//! All numerics are generic over the scalar via [`scalar::Real`]; the
//! `*64` aliases below fix the default double-precision configuration.

pub mod coeffs;
pub mod energy;
pub mod evolution;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod scalar;
pub mod sparse;
pub mod state;

pub use coeffs::{presets, CoefficientBounds, CoefficientSet};
pub use energy::{
    dissipation_rate, energy, energy_breakdown, fit_decay, observability_study, DecayFit,
    EnergyBreakdown, EnergyTrace, ObservabilityEstimate, ObservabilityReport,
};
pub use evolution::{Integrator, IntegratorConfig, Probe, RunOutput, Scheme, StepError};
pub use geometry::{
    check_gcc, escape_certificate, geodesic_flow, hamiltonian_flow, hessian_report,
    union_certified, EscapeConfig, EscapeOutcome, EuclideanMetric, GccConfig, GccReport,
    GeodesicPath, GeometryError, HessianReport, HyperbolicMetric, InterpolatedMetric, Metric,
    PathExit, RayStop, ScalarField,
};
pub use grid::{Edge, Grid, OmegaSpec};
pub use linalg::{SymMat, Vec2};
pub use operators::{
    assemble_div_grad, assemble_mass, assemble_resolvent, resolvent_rhs, CellField, OperatorKind,
    OperatorSet, ResolventForm, SparseOperator,
};
pub use scalar::Real;
pub use sparse::{pcg, Csr, Solution, SolveError, SolveOptions};
pub use state::State;

pub type Grid64 = Grid<f64>;
pub type CoefficientSet64 = CoefficientSet<f64>;
pub type State64 = State<f64>;
