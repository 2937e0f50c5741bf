//! Scenario files: schema, validation, canonical form.
//!
//! A scenario is one TOML file naming an experiment and the sections it
//! needs. `load` parses; `resolve` validates, fills every defaulted field,
//! and drops sections the experiment does not read, so serializing a
//! resolved scenario is the canonical form: parsing that output and
//! resolving again reproduces it byte for byte.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use viscowave::{
    presets, CoefficientSet64, Edge, Grid, Grid64, IntegratorConfig, OmegaSpec, Scheme,
    SolveOptions, State, State64, Vec2,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown keys: {}", keys.join(", "))]
    UnknownKeys { keys: Vec<String> },
    #[error("experiment {experiment} needs a [{section}] section")]
    MissingSection {
        experiment: &'static str,
        section: &'static str,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Coefficients(#[from] viscowave::coeffs::CoeffError),
    #[error(transparent)]
    Grid(#[from] viscowave::grid::GridError),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    DecayFit,
    Observability,
    GccCheck,
    HessianCert,
    GeodesicTrace,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::DecayFit => "decay-fit",
            Experiment::Observability => "observability",
            Experiment::GccCheck => "gcc-check",
            Experiment::HessianCert => "hessian-cert",
            Experiment::GeodesicTrace => "geodesic-trace",
        }
    }

    /// Experiments whose result is meaningless without dissipation.
    fn needs_damping(self) -> bool {
        matches!(self, Experiment::DecayFit | Experiment::Observability)
    }

    fn needs_evolution(self) -> bool {
        matches!(
            self,
            Experiment::Simulate | Experiment::DecayFit | Experiment::Observability
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    /// Domain extents; one entry per axis, so the length also fixes the
    /// dimension.
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaSection {
    /// One of: empty, collar, edges, cells.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<bool>>,
}

impl Default for OmegaSection {
    fn default() -> Self {
        OmegaSection {
            kind: "empty".into(),
            width: None,
            edges: None,
            cells: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSection {
    /// One of: constant, diag-linear, hyperbolic-halfplane, table.
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    /// Path to a coefficient table, relative to the scenario file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    /// One of: standing-wave, gaussian-bump, random-seeded.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes_u: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes_v: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry_halvings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySection {
    /// Fit window; defaults to the middle 60 percent of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilitySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GccSection {
    pub t_cap: f64,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchSpec {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSection {
    /// One of: from-coefficients, euclidean, hyperbolic.
    pub metric: String,
    pub dt: f64,
    pub t_max: f64,
    /// geodesic (velocity form) or hamiltonian (covector form).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    /// Report the largest deviation of any sample from the unit circle;
    /// meaningful for launches that should sweep it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_unit_circle: Option<bool>,
    /// Array of tables; must stay the last field so scalars serialize
    /// before it.
    pub launches: Vec<LaunchSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianSection {
    /// One of: from-coefficients, euclidean, hyperbolic.
    pub metric: String,
    /// One of: half-squared-distance, hyperbolic-squared-distance.
    pub field: String,
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoeffSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observability: Option<ObservabilitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcc: Option<GccSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hessian: Option<HessianSection>,
}

/// Parse a scenario file. Unknown keys are collected; `strict` turns them
/// into an error, otherwise they come back as warnings for the caller to
/// print.
pub fn load(path: &Path, strict: bool) -> Result<(Scenario, Vec<String>), ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, strict)
}

pub fn parse(text: &str, strict: bool) -> Result<(Scenario, Vec<String>), ScenarioError> {
    let de = toml::de::Deserializer::new(text);
    let mut unknown = Vec::new();
    let scenario: Scenario = serde_ignored::deserialize(de, |path| {
        // the deserializer's internal wrappers show up as "?" segments
        let joined = path.to_string();
        let cleaned: Vec<&str> = joined.split('.').filter(|s| *s != "?").collect();
        unknown.push(cleaned.join("."));
    })?;
    if strict && !unknown.is_empty() {
        return Err(ScenarioError::UnknownKeys { keys: unknown });
    }
    Ok((scenario, unknown))
}

impl Scenario {
    /// Validate, fill defaults, and drop sections the experiment ignores.
    /// The result serializes to the canonical form of the file. `base_dir`
    /// resolves relative coefficient-table paths; pass the scenario file's
    /// directory.
    pub fn resolve_with_base(mut self, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(invalid("scenario name must be nonempty"));
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(format!("runs/{}", self.name));
        }
        let exp = self.experiment;

        if exp.needs_evolution() {
            self.require_grid()?;
            self.require_section(self.coefficients.is_some(), "coefficients")?;
            self.require_section(self.initial.is_some(), "initial")?;
            self.require_section(self.integrator.is_some(), "integrator")?;
            self.omega = Some(self.omega.take().unwrap_or_default());
        }
        match exp {
            Experiment::Simulate => {
                self.decay = None;
            }
            Experiment::DecayFit => {
                let window = {
                    let integ = self.integrator.as_ref().expect("required above");
                    let t = integ.t_end;
                    self.decay
                        .as_ref()
                        .and_then(|d| d.window)
                        .unwrap_or([0.2 * t, 0.8 * t])
                };
                if !(window[0] < window[1]) {
                    return Err(invalid(format!(
                        "decay window [{}, {}] must be increasing",
                        window[0], window[1]
                    )));
                }
                self.decay = Some(DecaySection {
                    window: Some(window),
                });
            }
            Experiment::Observability => {
                let obs = self.observability.take().unwrap_or(ObservabilitySection {
                    samples: None,
                    zero_tol: None,
                });
                let samples = obs.samples.unwrap_or(32);
                if samples == 0 {
                    return Err(invalid("observability needs at least one sample"));
                }
                self.observability = Some(ObservabilitySection {
                    samples: Some(samples),
                    zero_tol: Some(obs.zero_tol.unwrap_or(1e-12)),
                });
                let kind = &self.initial.as_ref().expect("required above").kind;
                if kind != "random-seeded" {
                    return Err(invalid(format!(
                        "observability draws its own initial data per sample; \
                         initial kind must be random-seeded, got {kind}"
                    )));
                }
            }
            Experiment::GccCheck => {
                self.require_grid()?;
                self.require_section(self.coefficients.is_some(), "coefficients")?;
                let gcc = self.gcc.take().ok_or(ScenarioError::MissingSection {
                    experiment: exp.name(),
                    section: "gcc",
                })?;
                if !(gcc.t_cap > 0.0) || !(gcc.dt > 0.0) {
                    return Err(invalid("gcc t_cap and dt must be positive"));
                }
                let stride = gcc.position_stride.unwrap_or(4);
                let dirs = gcc.directions.unwrap_or(32);
                if stride == 0 || dirs == 0 {
                    return Err(invalid("gcc position_stride and directions must be nonzero"));
                }
                self.gcc = Some(GccSection {
                    t_cap: gcc.t_cap,
                    dt: gcc.dt,
                    position_stride: Some(stride),
                    directions: Some(dirs),
                });
                let omega = self.omega.clone().unwrap_or_default();
                if omega.kind == "empty" {
                    return Err(invalid(
                        "gcc-check asks whether rays reach the damping region; \
                         the region must be nonempty",
                    ));
                }
                self.omega = Some(omega);
            }
            Experiment::GeodesicTrace => {
                let geo = self.geodesic.take().ok_or(ScenarioError::MissingSection {
                    experiment: exp.name(),
                    section: "geodesic",
                })?;
                if geo.launches.is_empty() {
                    return Err(invalid("geodesic-trace needs at least one launch"));
                }
                if !(geo.dt > 0.0) || !(geo.t_max > 0.0) {
                    return Err(invalid("geodesic dt and t_max must be positive"));
                }
                check_metric_name(&geo.metric)?;
                let flow = geo.flow.clone().unwrap_or_else(|| "geodesic".into());
                if flow != "geodesic" && flow != "hamiltonian" {
                    return Err(invalid(format!(
                        "flow must be geodesic or hamiltonian, got {flow}"
                    )));
                }
                for l in &geo.launches {
                    if l.x.len() != 2 || l.v.len() != 2 {
                        return Err(invalid("each launch needs x = [x1, x2] and v = [v1, v2]"));
                    }
                    if l.v.iter().all(|c| *c == 0.0) {
                        return Err(invalid("launch direction must be nonzero"));
                    }
                    if geo.metric == "hyperbolic" && !(l.x[1] > 0.0) {
                        return Err(invalid(
                            "the hyperbolic metric lives on the upper half \
                             plane; launch points need x2 > 0",
                        ));
                    }
                }
                if geo.metric == "from-coefficients" {
                    self.require_grid()?;
                    self.require_section(self.coefficients.is_some(), "coefficients")?;
                } else {
                    self.grid = None;
                    self.omega = None;
                    self.coefficients = None;
                }
                self.geodesic = Some(GeodesicSection {
                    metric: geo.metric,
                    dt: geo.dt,
                    t_max: geo.t_max,
                    launches: geo.launches,
                    flow: Some(flow),
                    check_unit_circle: Some(geo.check_unit_circle.unwrap_or(false)),
                });
            }
            Experiment::HessianCert => {
                let h = self.hessian.take().ok_or(ScenarioError::MissingSection {
                    experiment: exp.name(),
                    section: "hessian",
                })?;
                check_metric_name(&h.metric)?;
                if h.field != "half-squared-distance" && h.field != "hyperbolic-squared-distance"
                {
                    return Err(invalid(format!(
                        "field must be half-squared-distance or \
                         hyperbolic-squared-distance, got {}",
                        h.field
                    )));
                }
                if h.center.len() != 2 {
                    return Err(invalid("hessian center needs two coordinates"));
                }
                if !(h.radius > 0.0) {
                    return Err(invalid("hessian radius must be positive"));
                }
                if (h.metric == "hyperbolic" || h.field == "hyperbolic-squared-distance")
                    && !(h.center[1] - h.radius > 0.0)
                {
                    return Err(invalid(
                        "the hyperbolic metric lives on the upper half plane; \
                         the disk needs center x2 - radius > 0",
                    ));
                }
                if h.metric == "from-coefficients" {
                    self.require_grid()?;
                    self.require_section(self.coefficients.is_some(), "coefficients")?;
                } else {
                    self.grid = None;
                    self.omega = None;
                    self.coefficients = None;
                }
                self.hessian = Some(HessianSection {
                    grid_points: Some(h.grid_points.unwrap_or(9)),
                    escape: Some(h.escape.unwrap_or(true)),
                    escape_dt: Some(h.escape_dt.unwrap_or(1e-3)),
                    ..h
                });
            }
        }

        // sections the experiment never reads are dropped from the canonical
        // form rather than half-validated
        if !exp.needs_evolution() {
            self.initial = None;
            self.integrator = None;
        }
        if exp != Experiment::DecayFit {
            self.decay = None;
        }
        if exp != Experiment::Observability {
            self.observability = None;
        }
        if exp != Experiment::GccCheck {
            self.gcc = None;
        }
        if exp != Experiment::GeodesicTrace {
            self.geodesic = None;
        }
        if exp != Experiment::HessianCert {
            self.hessian = None;
        }

        self.fill_section_defaults()?;
        self.validate_built(base_dir)?;
        Ok(self)
    }

    fn require_grid(&self) -> Result<(), ScenarioError> {
        self.require_section(self.grid.is_some(), "grid")
    }

    fn require_section(&self, present: bool, section: &'static str) -> Result<(), ScenarioError> {
        if present {
            Ok(())
        } else {
            Err(ScenarioError::MissingSection {
                experiment: self.experiment.name(),
                section,
            })
        }
    }

    /// Defaults that do not depend on the experiment.
    fn fill_section_defaults(&mut self) -> Result<(), ScenarioError> {
        if let Some(grid) = &self.grid {
            let dim = grid.lengths.len();
            if dim == 0 || dim > 2 {
                return Err(invalid("grid lengths must have one or two entries"));
            }
            if grid.cells.len() != dim {
                return Err(invalid(
                    "grid cells must have one entry per length entry",
                ));
            }
        }
        let dim = self.grid.as_ref().map(|g| g.lengths.len()).unwrap_or(2);
        if let Some(init) = &mut self.initial {
            init.amplitude = Some(init.amplitude.unwrap_or(1.0));
            match init.kind.as_str() {
                "standing-wave" => {
                    let def_u = vec![1; dim];
                    let mut def_v = vec![1; dim];
                    def_v[0] = 2;
                    let modes_u = init.modes_u.clone().unwrap_or(def_u);
                    let modes_v = init.modes_v.clone().unwrap_or(def_v);
                    if modes_u.len() != dim || modes_v.len() != dim {
                        return Err(invalid("standing-wave modes need one entry per axis"));
                    }
                    if modes_u.iter().chain(&modes_v).any(|m| *m == 0) {
                        return Err(invalid("standing-wave modes must be at least 1"));
                    }
                    init.modes_u = Some(modes_u);
                    init.modes_v = Some(modes_v);
                    init.center = None;
                    init.sigma = None;
                }
                "gaussian-bump" => {
                    let grid = self.grid.as_ref().expect("evolution experiments have one");
                    let center = init
                        .center
                        .clone()
                        .unwrap_or_else(|| grid.lengths.iter().map(|l| 0.5 * l).collect());
                    if center.len() != dim {
                        return Err(invalid("gaussian center needs one entry per axis"));
                    }
                    let min_len = grid.lengths.iter().cloned().fold(f64::INFINITY, f64::min);
                    let sigma = init.sigma.unwrap_or(0.1 * min_len);
                    if !(sigma > 0.0) {
                        return Err(invalid("gaussian sigma must be positive"));
                    }
                    init.center = Some(center);
                    init.sigma = Some(sigma);
                    init.modes_u = None;
                    init.modes_v = None;
                }
                "random-seeded" => {
                    init.modes_u = None;
                    init.modes_v = None;
                    init.center = None;
                    init.sigma = None;
                }
                other => {
                    return Err(invalid(format!(
                        "initial kind must be standing-wave, gaussian-bump, or \
                         random-seeded, got {other}"
                    )));
                }
            }
        }
        if let Some(integ) = &mut self.integrator {
            if !(integ.dt > 0.0) || !(integ.t_end > 0.0) {
                return Err(invalid("integrator dt and t_end must be positive"));
            }
            let scheme = integ.scheme.clone().unwrap_or_else(|| "midpoint".into());
            if scheme != "midpoint" && scheme != "backward-euler" {
                return Err(invalid(format!(
                    "scheme must be midpoint or backward-euler, got {scheme}"
                )));
            }
            integ.scheme = Some(scheme);
            integ.coupling = Some(integ.coupling.unwrap_or(true));
            integ.picard_tol = Some(integ.picard_tol.unwrap_or(1e-10));
            integ.picard_max = Some(integ.picard_max.unwrap_or(50));
            integ.retry_halvings = Some(integ.retry_halvings.unwrap_or(0));
            integ.rel_tol = Some(integ.rel_tol.unwrap_or(1e-12));
        }
        if let Some(omega) = &mut self.omega {
            match omega.kind.as_str() {
                "empty" => {
                    omega.width = None;
                    omega.edges = None;
                    omega.cells = None;
                }
                "collar" => {
                    let w = omega
                        .width
                        .ok_or_else(|| invalid("collar damping region needs width"))?;
                    if !(w > 0.0) {
                        return Err(invalid("collar width must be positive"));
                    }
                    omega.edges = None;
                    omega.cells = None;
                }
                "edges" => {
                    let w = omega
                        .width
                        .ok_or_else(|| invalid("edge damping region needs width"))?;
                    if !(w > 0.0) {
                        return Err(invalid("edge damping width must be positive"));
                    }
                    let edges = omega
                        .edges
                        .as_ref()
                        .ok_or_else(|| invalid("edge damping region needs an edges list"))?;
                    if edges.is_empty() {
                        return Err(invalid("edge damping region needs at least one edge"));
                    }
                    for e in edges {
                        parse_edge(e)?;
                    }
                    omega.cells = None;
                }
                "cells" => {
                    if omega.cells.is_none() {
                        return Err(invalid("cell damping region needs a cells mask"));
                    }
                    omega.width = None;
                    omega.edges = None;
                }
                other => {
                    return Err(invalid(format!(
                        "omega kind must be empty, collar, edges, or cells, got {other}"
                    )));
                }
            }
        }
        if let Some(c) = &mut self.coefficients {
            match c.preset.as_str() {
                "constant" => {
                    c.rho = Some(c.rho.unwrap_or(1.0));
                    c.k = Some(c.k.unwrap_or(1.0));
                    c.strength = Some(c.strength.unwrap_or(1.0));
                    c.base = None;
                    c.slope = None;
                    c.y0 = None;
                    c.table = None;
                }
                "diag-linear" => {
                    let base = c.base.clone().unwrap_or_else(|| vec![1.0, 1.0]);
                    let slope = c.slope.clone().unwrap_or_else(|| vec![0.0, 0.0]);
                    if base.len() != 2 || slope.len() != 2 {
                        return Err(invalid("diag-linear base and slope need two entries"));
                    }
                    c.base = Some(base);
                    c.slope = Some(slope);
                    c.strength = Some(c.strength.unwrap_or(1.0));
                    c.rho = None;
                    c.k = None;
                    c.y0 = None;
                    c.table = None;
                }
                "hyperbolic-halfplane" => {
                    c.y0 = Some(c.y0.unwrap_or(1.0));
                    c.strength = Some(c.strength.unwrap_or(1.0));
                    c.rho = None;
                    c.k = None;
                    c.base = None;
                    c.slope = None;
                    c.table = None;
                }
                "table" => {
                    if c.table.is_none() {
                        return Err(invalid("table coefficients need a table path"));
                    }
                    c.rho = None;
                    c.k = None;
                    c.strength = None;
                    c.base = None;
                    c.slope = None;
                    c.y0 = None;
                }
                other => {
                    return Err(invalid(format!(
                        "coefficient preset must be constant, diag-linear, \
                         hyperbolic-halfplane, or table, got {other}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Build everything once to surface construction errors at validation
    /// time instead of mid-run.
    fn validate_built(&self, base_dir: Option<&Path>) -> Result<(), ScenarioError> {
        if let Some(grid) = self.build_grid()? {
            if let Some(c) = &self.coefficients {
                let coeffs = self.build_coefficients(&grid, c, base_dir)?;
                if self.experiment.needs_damping() {
                    if grid.omega_cell_count() == 0 {
                        return Err(invalid(format!(
                            "{} measures energy lost to damping; the damping \
                             region is empty",
                            self.experiment.name()
                        )));
                    }
                    coeffs.require_effective_damping()?;
                }
            }
            if self.experiment == Experiment::GccCheck && grid.omega_cell_count() == 0 {
                return Err(invalid(
                    "gcc-check asks whether rays reach the damping region; \
                     the region is empty",
                ));
            }
        }
        Ok(())
    }

    /// None when the experiment runs without a grid (analytic metrics).
    pub fn build_grid(&self) -> Result<Option<Grid64>, ScenarioError> {
        let Some(g) = &self.grid else {
            return Ok(None);
        };
        let omega = self.build_omega()?;
        let grid = if g.lengths.len() == 1 {
            Grid::line(g.lengths[0], g.cells[0], omega)?
        } else {
            Grid::rectangle(
                [g.lengths[0], g.lengths[1]],
                [g.cells[0], g.cells[1]],
                omega,
            )?
        };
        Ok(Some(grid))
    }

    fn build_omega(&self) -> Result<OmegaSpec<f64>, ScenarioError> {
        let Some(o) = &self.omega else {
            return Ok(OmegaSpec::Empty);
        };
        Ok(match o.kind.as_str() {
            "empty" => OmegaSpec::Empty,
            "collar" => OmegaSpec::Collar {
                width: o.width.expect("validated"),
            },
            "edges" => OmegaSpec::Edges {
                edges: o
                    .edges
                    .as_ref()
                    .expect("validated")
                    .iter()
                    .map(|e| parse_edge(e).expect("validated"))
                    .collect(),
                width: o.width.expect("validated"),
            },
            "cells" => OmegaSpec::Cells(o.cells.clone().expect("validated")),
            _ => unreachable!("validated"),
        })
    }

    /// `base_dir` resolves relative table paths; pass the scenario file's
    /// directory.
    pub fn build_coefficients(
        &self,
        grid: &Grid64,
        c: &CoeffSection,
        base_dir: Option<&Path>,
    ) -> Result<CoefficientSet64, ScenarioError> {
        Ok(match c.preset.as_str() {
            "constant" => presets::constant(
                grid,
                c.rho.expect("validated"),
                c.k.expect("validated"),
                c.strength.expect("validated"),
            )?,
            "diag-linear" => {
                let base = c.base.as_ref().expect("validated");
                let slope = c.slope.as_ref().expect("validated");
                presets::diag_linear(
                    grid,
                    [base[0], base[1]],
                    [slope[0], slope[1]],
                    c.strength.expect("validated"),
                )?
            }
            "hyperbolic-halfplane" => presets::hyperbolic_halfplane(
                grid,
                c.y0.expect("validated"),
                c.strength.expect("validated"),
            )?,
            "table" => {
                let rel = c.table.as_ref().expect("validated");
                let path = match base_dir {
                    Some(d) => d.join(rel),
                    None => Path::new(rel).to_path_buf(),
                };
                let file = fs::File::open(&path).map_err(|source| ScenarioError::Read {
                    path: path.display().to_string(),
                    source,
                })?;
                CoefficientSet64::load_table(grid, std::io::BufReader::new(file))?
            }
            _ => unreachable!("validated"),
        })
    }

    pub fn coefficients_for(
        &self,
        grid: &Grid64,
        base_dir: Option<&Path>,
    ) -> Result<CoefficientSet64, ScenarioError> {
        let c = self
            .coefficients
            .as_ref()
            .expect("callers check the section exists");
        self.build_coefficients(grid, c, base_dir)
    }

    pub fn build_initial(&self, grid: &Grid64, seed: u64) -> State64 {
        let init = self.initial.as_ref().expect("validated");
        let amp = init.amplitude.expect("validated");
        let lengths = grid.extents();
        match init.kind.as_str() {
            "standing-wave" => {
                let mu = init.modes_u.clone().expect("validated");
                let mv = init.modes_v.clone().expect("validated");
                let wave = move |modes: &[usize], x: Vec2<f64>| {
                    let mut s = (modes[0] as f64 * std::f64::consts::PI * x.x / lengths[0]).sin();
                    if grid.dim() == 2 {
                        s *= (modes[1] as f64 * std::f64::consts::PI * x.y / lengths[1]).sin();
                    }
                    s
                };
                State::from_profiles(
                    grid,
                    |x| amp * wave(&mu, x),
                    |x| amp * wave(&mv, x),
                    |_| 0.0,
                    |_| 0.0,
                )
            }
            "gaussian-bump" => {
                let center = init.center.clone().expect("validated");
                let sigma = init.sigma.expect("validated");
                let c = Vec2::new(center[0], *center.get(1).unwrap_or(&0.0));
                State::from_profiles(
                    grid,
                    |x| {
                        let d = x.sub(c);
                        amp * (-d.dot(d) / (2.0 * sigma * sigma)).exp()
                    },
                    |_| 0.0,
                    |_| 0.0,
                    |_| 0.0,
                )
            }
            "random-seeded" => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                State::random_interior(grid, amp, &mut rng)
            }
            _ => unreachable!("validated"),
        }
    }

    pub fn build_integrator_config(&self) -> IntegratorConfig<f64> {
        let i = self.integrator.as_ref().expect("validated");
        let mut cfg = IntegratorConfig::new(i.dt, i.t_end);
        cfg.scheme = match i.scheme.as_deref().expect("validated") {
            "backward-euler" => Scheme::BackwardEuler,
            _ => Scheme::Midpoint,
        };
        cfg.coupling = i.coupling.expect("validated");
        cfg.picard_tol = i.picard_tol.expect("validated");
        cfg.picard_max = i.picard_max.expect("validated");
        cfg.retry_halvings = i.retry_halvings.expect("validated");
        cfg.solve = SolveOptions {
            rel_tol: i.rel_tol.expect("validated"),
            max_iters: None,
        };
        cfg
    }

    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

fn parse_edge(name: &str) -> Result<Edge, ScenarioError> {
    Ok(match name {
        "left" => Edge::Left,
        "right" => Edge::Right,
        "bottom" => Edge::Bottom,
        "top" => Edge::Top,
        other => {
            return Err(invalid(format!(
                "edge must be left, right, bottom, or top, got {other}"
            )))
        }
    })
}

fn check_metric_name(name: &str) -> Result<(), ScenarioError> {
    match name {
        "from-coefficients" | "euclidean" | "hyperbolic" => Ok(()),
        other => Err(invalid(format!(
            "metric must be from-coefficients, euclidean, or hyperbolic, got {other}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "min"
        experiment = "simulate"
        [grid]
        lengths = [1.0]
        cells = [32]
        [coefficients]
        preset = "constant"
        [initial]
        kind = "standing-wave"
        [integrator]
        dt = 1e-2
        t_end = 1.0
    "#;

    fn resolved(text: &str) -> Scenario {
        parse(text, true).unwrap().0.resolve_with_base(None).unwrap()
    }

    fn resolve_err(text: &str) -> String {
        parse(text, true)
            .unwrap()
            .0
            .resolve_with_base(None)
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn minimal_simulate_fills_every_default() {
        let s = resolved(MINIMAL);
        assert_eq!(s.output_dir.as_deref(), Some("runs/min"));
        assert_eq!(s.omega.as_ref().unwrap().kind, "empty");
        let c = s.coefficients.as_ref().unwrap();
        assert_eq!((c.rho, c.k, c.strength), (Some(1.0), Some(1.0), Some(1.0)));
        let init = s.initial.as_ref().unwrap();
        assert_eq!(init.modes_u.as_deref(), Some(&[1][..]));
        assert_eq!(init.modes_v.as_deref(), Some(&[2][..]));
        let integ = s.integrator.as_ref().unwrap();
        assert_eq!(integ.scheme.as_deref(), Some("midpoint"));
        assert_eq!(integ.coupling, Some(true));
    }

    #[test]
    fn resolve_is_a_fixed_point_of_its_own_output() {
        let first = resolved(MINIMAL).canonical_toml();
        let second = resolved(&first).canonical_toml();
        assert_eq!(first, second);
    }

    #[test]
    fn unknown_keys_warn_unless_strict() {
        let text = format!("{MINIMAL}\nmystery = 1\n");
        let (_, warnings) = parse(&text, false).unwrap();
        // the stray key lands in the last open table and is reported by path
        assert_eq!(warnings, vec!["integrator.mystery".to_string()]);
        assert!(matches!(
            parse(&text, true),
            Err(ScenarioError::UnknownKeys { .. })
        ));
    }

    #[test]
    fn decay_fit_rejects_ineffective_damping() {
        let zero_strength = MINIMAL
            .replace("experiment = \"simulate\"", "experiment = \"decay-fit\"")
            .replace(
                "preset = \"constant\"",
                "preset = \"constant\"\nstrength = 0.0",
            )
            + "\n[omega]\nkind = \"collar\"\nwidth = 0.1\n";
        assert!(resolve_err(&zero_strength).contains("damping must be strictly positive"));

        let no_region = MINIMAL.replace("experiment = \"simulate\"", "experiment = \"decay-fit\"");
        assert!(resolve_err(&no_region).contains("damping region is empty"));
    }

    #[test]
    fn missing_sections_name_the_experiment() {
        let text = r#"
            name = "bare"
            experiment = "decay-fit"
        "#;
        assert_eq!(resolve_err(text), "experiment decay-fit needs a [grid] section");
    }

    #[test]
    fn observability_insists_on_seeded_draws() {
        let text = MINIMAL
            .replace("experiment = \"simulate\"", "experiment = \"observability\"")
            + "\n[omega]\nkind = \"collar\"\nwidth = 0.1\n";
        assert!(resolve_err(&text).contains("must be random-seeded"));
    }

    #[test]
    fn closed_form_metrics_drop_the_grid_sections() {
        let text = r#"
            name = "geo"
            experiment = "geodesic-trace"
            [grid]
            lengths = [1.0, 1.0]
            cells = [8, 8]
            [geodesic]
            metric = "hyperbolic"
            dt = 1e-2
            t_max = 0.5
            [[geodesic.launches]]
            x = [0.0, 1.0]
            v = [1.0, 0.0]
        "#;
        let s = resolved(text);
        assert!(s.grid.is_none());
        assert_eq!(s.geodesic.as_ref().unwrap().flow.as_deref(), Some("geodesic"));
    }

    #[test]
    fn decay_window_defaults_to_the_middle_of_the_run() {
        let text = MINIMAL.replace("experiment = \"simulate\"", "experiment = \"decay-fit\"")
            + "\n[omega]\nkind = \"collar\"\nwidth = 0.1\n";
        let s = resolved(&text);
        assert_eq!(s.decay.unwrap().window, Some([0.2, 0.8]));
    }
}
