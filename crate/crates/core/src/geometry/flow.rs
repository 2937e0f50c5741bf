//! Ray tracing.
//!
//! The same curves are integrated in two forms: the hamiltonian system in
//! (x, xi) for p = xi.H(x)xi / 2, and the geodesic equation in (x, v). Under
//! xi = G(x)v they are the identical curve, which the test suite exploits as
//! a cross-check. Both use classical fixed-step fourth-order Runge-Kutta;
//! the G-speed along a path is a conserved quantity of the exact flow, so
//! its recorded drift is the accuracy monitor.

use super::metric::Metric;
use super::GeometryError;
use crate::grid::Grid;
use crate::linalg::Vec2;
use crate::scalar::Real;

/// Termination region for a traced ray, checked at every sample.
pub enum RayStop<'a, T: Real> {
    /// Run to the time horizon.
    None,
    /// Stop on entering a damping cell of the grid, or on leaving its box.
    GridOmega(&'a Grid<T>),
    /// Stop on leaving the axis-aligned box [lo, hi].
    Outside { lo: Vec2<T>, hi: Vec2<T> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathExit<T> {
    /// First sample inside the damping support (time resolution = one step).
    HitOmega { t: T },
    /// Left the grid box.
    HitBoundary { t: T },
    /// Reached the time horizon.
    MaxTime,
    /// Left a caller-supplied bounding box.
    LeftDomain { t: T },
}

#[derive(Clone, Copy, Debug)]
pub struct PathSample<T> {
    pub t: T,
    pub x: Vec2<T>,
    pub xdot: Vec2<T>,
}

#[derive(Clone, Debug)]
pub struct GeodesicPath<T> {
    pub samples: Vec<PathSample<T>>,
    /// G(x) xdot . xdot at each sample; constant on the exact curve.
    pub speed_trace: Vec<T>,
    pub exit: PathExit<T>,
}

impl<T: Real> GeodesicPath<T> {
    pub fn last(&self) -> &PathSample<T> {
        self.samples.last().expect("a path holds at least its launch sample")
    }

    pub fn hit_time(&self) -> Option<T> {
        match self.exit {
            PathExit::HitOmega { t } => Some(t),
            _ => None,
        }
    }

    /// Largest relative deviation of the speed from its launch value,
    /// divided by the elapsed time.
    pub fn speed_drift_rate(&self) -> T {
        let s0 = self.speed_trace[0];
        let mut worst = T::zero();
        for &s in &self.speed_trace[1..] {
            worst = worst.max((s - s0).abs());
        }
        let elapsed = self.last().t;
        if elapsed > T::zero() && s0 != T::zero() {
            worst / (s0.abs() * elapsed)
        } else {
            T::zero()
        }
    }
}

/// Trace the hamiltonian system: xdot = H(x) xi, xidot_i = -xi.dH_i xi / 2.
/// The recorded velocity is H(x) xi.
pub fn hamiltonian_flow<T: Real, M: Metric<T>>(
    metric: &M,
    x0: Vec2<T>,
    xi0: Vec2<T>,
    dt: T,
    t_max: T,
    stop: RayStop<'_, T>,
) -> Result<GeodesicPath<T>, GeometryError> {
    let half = T::of(0.5);
    integrate(
        metric,
        x0,
        xi0,
        dt,
        t_max,
        stop,
        |m, x, xi| {
            let dh = m.dh(x);
            (
                m.h(x).mul_vec(xi),
                Vec2::new(-half * dh[0].quad(xi), -half * dh[1].quad(xi)),
            )
        },
        |m, x, xi| m.h(x).mul_vec(xi),
    )
}

/// Trace the geodesic equation in velocity form:
/// G(x) vdot = [v.dG_i v / 2]_i - (sum_k v_k dG_k) v.
pub fn geodesic_flow<T: Real, M: Metric<T>>(
    metric: &M,
    x0: Vec2<T>,
    v0: Vec2<T>,
    dt: T,
    t_max: T,
    stop: RayStop<'_, T>,
) -> Result<GeodesicPath<T>, GeometryError> {
    let half = T::of(0.5);
    integrate(
        metric,
        x0,
        v0,
        dt,
        t_max,
        stop,
        |m, x, v| {
            let dg = m.dg(x);
            let quad = Vec2::new(half * dg[0].quad(v), half * dg[1].quad(v));
            let mix = dg[0].scaled(v.x).add(dg[1].scaled(v.y)).mul_vec(v);
            (v, m.h(x).mul_vec(quad.sub(mix)))
        },
        |_, _, v| v,
    )
}

fn integrate<T: Real, M: Metric<T>>(
    metric: &M,
    x0: Vec2<T>,
    w0: Vec2<T>,
    dt: T,
    t_max: T,
    stop: RayStop<'_, T>,
    deriv: impl Fn(&M, Vec2<T>, Vec2<T>) -> (Vec2<T>, Vec2<T>),
    velocity: impl Fn(&M, Vec2<T>, Vec2<T>) -> Vec2<T>,
) -> Result<GeodesicPath<T>, GeometryError> {
    if !(dt > T::zero()) {
        return Err(GeometryError::NonPositiveStep { got: dt.as_f64() });
    }
    let steps = (t_max / dt).round().max(T::one()).to_usize().unwrap_or(1);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut speed_trace = Vec::with_capacity(steps + 1);
    let mut x = x0;
    let mut w = w0;

    let record =
        |x: Vec2<T>, w: Vec2<T>, t: T, samples: &mut Vec<PathSample<T>>, speeds: &mut Vec<T>| {
            let g = metric.g(x);
            if !g.is_spd() {
                return Err(GeometryError::NotPositiveDefinite {
                    x: x.x.as_f64(),
                    y: x.y.as_f64(),
                });
            }
            let xdot = velocity(metric, x, w);
            samples.push(PathSample { t, x, xdot });
            speeds.push(g.quad(xdot));
            Ok(())
        };

    record(x, w, T::zero(), &mut samples, &mut speed_trace)?;
    if let Some(exit) = classify(&stop, x, T::zero()) {
        return Ok(GeodesicPath { samples, speed_trace, exit });
    }

    let two = T::of(2.0);
    let sixth = dt / T::of(6.0);
    let half_dt = dt * T::of(0.5);
    for k in 0..steps {
        let (k1x, k1w) = deriv(metric, x, w);
        let (k2x, k2w) = deriv(metric, x.add(k1x.scale(half_dt)), w.add(k1w.scale(half_dt)));
        let (k3x, k3w) = deriv(metric, x.add(k2x.scale(half_dt)), w.add(k2w.scale(half_dt)));
        let (k4x, k4w) = deriv(metric, x.add(k3x.scale(dt)), w.add(k3w.scale(dt)));
        x = x.add(
            k1x.add(k2x.scale(two)).add(k3x.scale(two)).add(k4x).scale(sixth),
        );
        w = w.add(
            k1w.add(k2w.scale(two)).add(k3w.scale(two)).add(k4w).scale(sixth),
        );
        let t = dt * T::of((k + 1) as f64);
        record(x, w, t, &mut samples, &mut speed_trace)?;
        if let Some(exit) = classify(&stop, x, t) {
            return Ok(GeodesicPath { samples, speed_trace, exit });
        }
    }
    Ok(GeodesicPath { samples, speed_trace, exit: PathExit::MaxTime })
}

fn classify<T: Real>(stop: &RayStop<'_, T>, x: Vec2<T>, t: T) -> Option<PathExit<T>> {
    match stop {
        RayStop::None => None,
        RayStop::GridOmega(grid) => match grid.cell_of_point(x) {
            None => Some(PathExit::HitBoundary { t }),
            Some(cell) if grid.omega_mask()[cell] => Some(PathExit::HitOmega { t }),
            Some(_) => None,
        },
        RayStop::Outside { lo, hi } => {
            if x.x < lo.x || x.x > hi.x || x.y < lo.y || x.y > hi.y {
                Some(PathExit::LeftDomain { t })
            } else {
                None
            }
        }
    }
}
