//! Convexity certificates for undamped pockets.
//!
//! A scalar function whose metric Hessian is uniformly positive on a region
//! forces every unit-speed geodesic to leave that region within an explicit
//! time: along a geodesic, (phi o gamma)'' = Hess phi(gamma', gamma') >= c,
//! so phi grows quadratically and must exceed its own range bound. The
//! certificate records the margin c and the resulting escape-time bound
//! 2 sqrt(2 osc(phi) / c), then validates the bound empirically on a ray
//! fan.

use super::flow::{geodesic_flow, RayStop};
use super::metric::Metric;
use super::GeometryError;
use crate::linalg::{SymMat, Vec2};
use crate::scalar::Real;
use rayon::prelude::*;

/// Scalar function with first and second coordinate partials.
pub trait ScalarField<T: Real>: Sync {
    fn value(&self, x: Vec2<T>) -> T;
    fn gradient(&self, x: Vec2<T>) -> Vec2<T>;
    fn second_partials(&self, x: Vec2<T>) -> SymMat<T>;
}

/// Field with hand-written derivatives.
pub struct ClosureField<V, G, H> {
    value: V,
    gradient: G,
    second: H,
}

impl<V, G, H> ClosureField<V, G, H> {
    pub fn new(value: V, gradient: G, second: H) -> Self {
        ClosureField { value, gradient, second }
    }
}

impl<T, V, G, H> ScalarField<T> for ClosureField<V, G, H>
where
    T: Real,
    V: Fn(Vec2<T>) -> T + Sync,
    G: Fn(Vec2<T>) -> Vec2<T> + Sync,
    H: Fn(Vec2<T>) -> SymMat<T> + Sync,
{
    fn value(&self, x: Vec2<T>) -> T {
        (self.value)(x)
    }

    fn gradient(&self, x: Vec2<T>) -> Vec2<T> {
        (self.gradient)(x)
    }

    fn second_partials(&self, x: Vec2<T>) -> SymMat<T> {
        (self.second)(x)
    }
}

/// Field given by a value closure alone; derivatives by centered
/// differences. The second-difference step is wider than the gradient step
/// because halving it quadruples the roundoff amplification 4 eps / step^2.
pub struct FiniteDifferenceField<T, F> {
    f: F,
    gradient_step: T,
    curvature_step: T,
}

impl<T: Real, F: Fn(Vec2<T>) -> T + Sync> FiniteDifferenceField<T, F> {
    pub fn new(f: F) -> Self {
        FiniteDifferenceField {
            f,
            gradient_step: T::of(1e-5),
            curvature_step: T::of(2e-4),
        }
    }
}

impl<T: Real, F: Fn(Vec2<T>) -> T + Sync> ScalarField<T> for FiniteDifferenceField<T, F> {
    fn value(&self, x: Vec2<T>) -> T {
        (self.f)(x)
    }

    fn gradient(&self, x: Vec2<T>) -> Vec2<T> {
        let h = self.gradient_step;
        let two_h = T::of(2.0) * h;
        Vec2::new(
            ((self.f)(Vec2::new(x.x + h, x.y)) - (self.f)(Vec2::new(x.x - h, x.y))) / two_h,
            ((self.f)(Vec2::new(x.x, x.y + h)) - (self.f)(Vec2::new(x.x, x.y - h))) / two_h,
        )
    }

    fn second_partials(&self, x: Vec2<T>) -> SymMat<T> {
        let s = self.curvature_step;
        let s2 = s * s;
        let two = T::of(2.0);
        let f = &self.f;
        let at = |dx: T, dy: T| f(Vec2::new(x.x + dx, x.y + dy));
        let center = f(x);
        let fxx = (at(s, T::zero()) - two * center + at(-s, T::zero())) / s2;
        let fyy = (at(T::zero(), s) - two * center + at(T::zero(), -s)) / s2;
        let fxy = (at(s, s) - at(s, -s) - at(-s, s) + at(-s, -s)) / (T::of(4.0) * s2);
        SymMat::new(fxx, fxy, fyy)
    }
}

fn comp<T: Real>(m: SymMat<T>, i: usize, j: usize) -> T {
    match (i, j) {
        (0, 0) => m.xx,
        (1, 1) => m.yy,
        _ => m.xy,
    }
}

/// Christoffel symbols at x: Gamma^k_ij as a symmetric matrix over the
/// lower index pair, for k = 0, 1.
pub fn christoffel<T: Real, M: Metric<T>>(metric: &M, x: Vec2<T>) -> [SymMat<T>; 2] {
    let h = metric.h(x);
    let dg = metric.dg(x);
    let half = T::of(0.5);
    // a(l, i, j) = d_i G_lj + d_j G_li - d_l G_ij
    let a = |l: usize, i: usize, j: usize| {
        comp(dg[i], l, j) + comp(dg[j], l, i) - comp(dg[l], i, j)
    };
    let gamma = |k: usize, i: usize, j: usize| {
        half * (comp(h, k, 0) * a(0, i, j) + comp(h, k, 1) * a(1, i, j))
    };
    [
        SymMat::new(gamma(0, 0, 0), gamma(0, 0, 1), gamma(0, 1, 1)),
        SymMat::new(gamma(1, 0, 0), gamma(1, 0, 1), gamma(1, 1, 1)),
    ]
}

/// Metric Hessian of a field at x:
/// Hess_ij = d2_ij phi - Gamma^k_ij d_k phi.
pub fn metric_hessian<T: Real, M: Metric<T>, F: ScalarField<T>>(
    metric: &M,
    field: &F,
    x: Vec2<T>,
) -> SymMat<T> {
    let d2 = field.second_partials(x);
    let grad = field.gradient(x);
    let gamma = christoffel(metric, x);
    d2.sub(gamma[0].scaled(grad.x)).sub(gamma[1].scaled(grad.y))
}

#[derive(Clone, Debug)]
pub struct HessianReport<T> {
    pub region: Vec<Vec2<T>>,
    /// Smallest value of Hess(v, v) over G-unit vectors, minimized over the
    /// region.
    pub min_eigenvalue: T,
    pub positive: bool,
    pub argmin: Vec2<T>,
}

pub fn hessian_report<T: Real, M: Metric<T>, F: ScalarField<T>>(
    metric: &M,
    field: &F,
    region: &[Vec2<T>],
) -> Result<HessianReport<T>, GeometryError> {
    if region.is_empty() {
        return Err(GeometryError::EmptyRegion);
    }
    let mut min_eigenvalue = T::infinity();
    let mut argmin = region[0];
    for &x in region {
        let g = metric.g(x);
        if !g.is_spd() {
            return Err(GeometryError::NotPositiveDefinite {
                x: x.x.as_f64(),
                y: x.y.as_f64(),
            });
        }
        let lambda = metric_hessian(metric, field, x).min_gen_eigenvalue(g);
        if lambda < min_eigenvalue {
            min_eigenvalue = lambda;
            argmin = x;
        }
    }
    Ok(HessianReport {
        region: region.to_vec(),
        min_eigenvalue,
        positive: min_eigenvalue > T::zero(),
        argmin,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct EscapeConfig<T> {
    /// Launch angles per position.
    pub directions: usize,
    /// Launch from every this-many-th region point.
    pub launch_stride: usize,
    pub dt: T,
}

impl<T: Real> EscapeConfig<T> {
    pub fn new(dt: T) -> Self {
        EscapeConfig { directions: 8, launch_stride: 4, dt }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EscapeCertificate<T> {
    /// Uniform lower bound on the metric Hessian over the region.
    pub margin: T,
    /// max phi - min phi over the region.
    pub oscillation: T,
    /// 2 sqrt(2 oscillation / margin): no unit-speed geodesic stays longer.
    pub time_bound: T,
    pub rays: usize,
    pub max_exit_time: T,
    /// Every traced ray left the region within the bound (one step of
    /// detection slack).
    pub confirmed: bool,
}

#[derive(Clone, Copy, Debug)]
pub enum EscapeOutcome<T> {
    Certified(EscapeCertificate<T>),
    /// The Hessian is not uniformly positive, so convexity proves nothing.
    Refused { min_eigenvalue: T },
}

impl<T> EscapeOutcome<T> {
    pub fn certified(&self) -> bool {
        matches!(self, EscapeOutcome::Certified(_))
    }
}

/// Certify that every unit-speed geodesic leaves the region within
/// 2 sqrt(2 osc(phi) / c), where c is the Hessian margin of `field` on the
/// region, and confirm the bound on a deterministic ray fan. `inside` is
/// the membership test that defines leaving.
pub fn escape_certificate<T, M, F, B>(
    metric: &M,
    field: &F,
    region: &[Vec2<T>],
    inside: B,
    config: &EscapeConfig<T>,
) -> Result<EscapeOutcome<T>, GeometryError>
where
    T: Real,
    M: Metric<T>,
    F: ScalarField<T>,
    B: Fn(Vec2<T>) -> bool + Sync,
{
    let report = hessian_report(metric, field, region)?;
    if !report.positive {
        return Ok(EscapeOutcome::Refused { min_eigenvalue: report.min_eigenvalue });
    }
    let margin = report.min_eigenvalue;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &x in region {
        let v = field.value(x);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let oscillation = hi - lo;
    let time_bound = T::of(2.0) * (T::of(2.0) * oscillation / margin).sqrt();

    let dirs: Vec<Vec2<T>> = (0..config.directions.max(1))
        .map(|k| {
            let angle = T::of(2.0) * T::PI() * T::of(k as f64)
                / T::of(config.directions.max(1) as f64);
            Vec2::new(angle.cos(), angle.sin())
        })
        .collect();
    let mut launches = Vec::new();
    for &x0 in region.iter().step_by(config.launch_stride.max(1)) {
        let g = metric.g(x0);
        for dir in &dirs {
            launches.push((x0, dir.scale(T::one() / g.quad(*dir).sqrt())));
        }
    }

    let horizon = time_bound + T::of(10.0) * config.dt;
    let slack = config.dt * T::of(1.0 + 1e-9);
    let exits: Vec<Option<T>> = launches
        .par_iter()
        .map(|&(x0, v0)| {
            let path = geodesic_flow(metric, x0, v0, config.dt, horizon, RayStop::None)?;
            Ok(path.samples.iter().find(|s| !inside(s.x)).map(|s| s.t))
        })
        .collect::<Result<_, GeometryError>>()?;

    let mut max_exit_time = T::zero();
    let mut confirmed = true;
    for exit in &exits {
        match exit {
            Some(t) => {
                max_exit_time = max_exit_time.max(*t);
                confirmed = confirmed && *t <= time_bound + slack;
            }
            None => {
                max_exit_time = max_exit_time.max(horizon);
                confirmed = false;
            }
        }
    }
    Ok(EscapeOutcome::Certified(EscapeCertificate {
        margin,
        oscillation,
        time_bound,
        rays: launches.len(),
        max_exit_time,
        confirmed,
    }))
}

/// A union of disjoint regions is certified when every component is.
pub fn union_certified<T>(parts: &[EscapeOutcome<T>]) -> bool {
    !parts.is_empty() && parts.iter().all(|p| p.certified())
}

/// Points of an n x n lattice over the bounding square that fall in the
/// closed disk.
pub fn disk_points<T: Real>(center: Vec2<T>, radius: T, n: usize) -> Vec<Vec2<T>> {
    let mut points = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let frac = |k: usize| {
                if n == 1 {
                    T::of(0.5)
                } else {
                    T::of(k as f64) / T::of((n - 1) as f64)
                }
            };
            let p = Vec2::new(
                center.x - radius + T::of(2.0) * radius * frac(i),
                center.y - radius + T::of(2.0) * radius * frac(j),
            );
            if p.sub(center).norm() <= radius {
                points.push(p);
            }
        }
    }
    points
}
