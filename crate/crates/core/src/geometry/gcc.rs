//! Brute-force check of the geometric control condition: every unit-speed
//! geodesic must enter the damping support within a finite time.
//!
//! A deterministic fan of rays is launched from cell centers and traced
//! until it enters a damping cell, leaves the domain, or times out. A
//! negative verdict comes with a concrete witness ray; a positive verdict
//! is as strong as the launch sampling is fine.

use super::flow::{geodesic_flow, PathExit, RayStop};
use super::metric::Metric;
use super::GeometryError;
use crate::grid::Grid;
use crate::linalg::Vec2;
use crate::scalar::Real;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug)]
pub struct GccConfig<T> {
    /// Launch from every this-many-th cell along each axis.
    pub position_stride: usize,
    /// Uniformly spaced launch angles in 2D; 1D always uses the two signs.
    pub directions: usize,
    /// Give up on a ray after this much time.
    pub t_cap: T,
    pub dt: T,
}

impl<T: Real> GccConfig<T> {
    pub fn new(t_cap: T, dt: T) -> Self {
        GccConfig { position_stride: 4, directions: 32, t_cap, dt }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RayVerdict<T> {
    pub x0: Vec2<T>,
    pub v0: Vec2<T>,
    /// Time of entry into the damping support, None for a miss.
    pub hit: Option<T>,
}

#[derive(Clone, Debug)]
pub struct GccReport<T> {
    pub satisfied: bool,
    /// Largest observed hitting time: the control-time estimate when the
    /// verdict is positive.
    pub t0_estimate: Option<T>,
    /// Slowest hitting ray, or the first ray that never hit.
    pub worst_ray: Option<RayVerdict<T>>,
    pub rays: usize,
    pub hits: usize,
}

/// Launch unit-speed geodesics from every `position_stride`-th undamped cell
/// center in `directions` uniformly spaced directions and report whether all
/// of them reach the damping support before `t_cap`.
///
/// Rays that leave the grid box count as hits only when omega is a collar
/// along the entire boundary (then a ray cannot reach the boundary without
/// crossing the collar, and the box exit is a late detection of that
/// crossing). An empty launch set, meaning every sampled cell is damped, is
/// vacuously satisfied.
pub fn check_gcc<T: Real, M: Metric<T>>(
    metric: &M,
    grid: &Grid<T>,
    config: &GccConfig<T>,
) -> Result<GccReport<T>, GeometryError> {
    let stride = config.position_stride.max(1);
    let dirs: Vec<Vec2<T>> = if grid.dim() == 1 {
        vec![Vec2::new(T::one(), T::zero()), Vec2::new(-T::one(), T::zero())]
    } else {
        (0..config.directions.max(1))
            .map(|k| {
                let angle =
                    T::of(2.0) * T::PI() * T::of(k as f64) / T::of(config.directions.max(1) as f64);
                Vec2::new(angle.cos(), angle.sin())
            })
            .collect()
    };

    let cells = grid.cells();
    let rows = if grid.dim() == 1 { 1 } else { cells[1] };
    let mut launches = Vec::new();
    for j in (0..rows).step_by(stride) {
        for i in (0..cells[0]).step_by(stride) {
            let cell = grid.cell_index(i, j);
            if grid.omega_mask()[cell] {
                continue;
            }
            let x0 = grid.cell_center(cell);
            let g = metric.g(x0);
            if !g.is_spd() {
                return Err(GeometryError::NotPositiveDefinite {
                    x: x0.x.as_f64(),
                    y: x0.y.as_f64(),
                });
            }
            for dir in &dirs {
                let v0 = dir.scale(T::one() / g.quad(*dir).sqrt());
                launches.push((x0, v0));
            }
        }
    }

    let boundary_is_hit = grid.omega_is_full_collar() && grid.omega_cell_count() > 0;
    let verdicts: Vec<RayVerdict<T>> = launches
        .par_iter()
        .map(|&(x0, v0)| {
            let path =
                geodesic_flow(metric, x0, v0, config.dt, config.t_cap, RayStop::GridOmega(grid))?;
            let hit = match path.exit {
                PathExit::HitOmega { t } => Some(t),
                PathExit::HitBoundary { t } if boundary_is_hit => Some(t),
                _ => None,
            };
            Ok(RayVerdict { x0, v0, hit })
        })
        .collect::<Result<_, GeometryError>>()?;

    let mut satisfied = true;
    let mut t0_estimate: Option<T> = None;
    let mut slowest_hit: Option<RayVerdict<T>> = None;
    let mut first_miss: Option<RayVerdict<T>> = None;
    let mut hits = 0;
    for v in &verdicts {
        match v.hit {
            Some(t) => {
                hits += 1;
                if t0_estimate.map_or(true, |t0| t > t0) {
                    t0_estimate = Some(t);
                    slowest_hit = Some(*v);
                }
            }
            None => {
                satisfied = false;
                if first_miss.is_none() {
                    first_miss = Some(*v);
                }
            }
        }
    }
    Ok(GccReport {
        satisfied,
        t0_estimate,
        worst_ray: first_miss.or(slowest_hit),
        rays: verdicts.len(),
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::EuclideanMetric;
    use crate::grid::{Edge, Grid, OmegaSpec};

    #[test]
    fn full_collar_on_the_unit_square_is_controlled_within_the_diameter() {
        let grid = Grid::rectangle([1.0, 1.0], [32, 32], OmegaSpec::collar(0.1)).unwrap();
        let report =
            check_gcc(&EuclideanMetric, &grid, &GccConfig::new(2.0, 1e-3)).unwrap();
        assert!(report.satisfied);
        assert_eq!(report.rays, report.hits);
        let t0 = report.t0_estimate.unwrap();
        assert!(t0 > 0.0 && t0 <= 2.0f64.sqrt() + 1e-3, "t0 = {t0}");
        assert!(report.worst_ray.unwrap().hit.is_some());
    }

    #[test]
    fn one_sided_damping_admits_a_gliding_ray() {
        let grid = Grid::rectangle(
            [1.0, 1.0],
            [32, 32],
            OmegaSpec::Edges { edges: vec![Edge::Bottom], width: 0.1 },
        )
        .unwrap();
        let report =
            check_gcc(&EuclideanMetric, &grid, &GccConfig::new(3.0f64, 1e-3)).unwrap();
        assert!(!report.satisfied);
        assert!(report.hits < report.rays);
        let witness = report.worst_ray.unwrap();
        assert!(witness.hit.is_none());
        // The witness glides parallel to the damped edge.
        assert!(witness.v0.y.abs() < 1e-12, "witness direction {:?}", witness.v0);
    }

    #[test]
    fn interval_with_collar_is_controlled_within_its_length() {
        let grid = Grid::line(1.0, 32, OmegaSpec::collar(0.1)).unwrap();
        let report =
            check_gcc(&EuclideanMetric, &grid, &GccConfig::new(2.0, 1e-3)).unwrap();
        assert!(report.satisfied);
        let t0 = report.t0_estimate.unwrap();
        assert!(t0 <= 1.0 + 1e-3, "t0 = {t0}");
        // 1D fans are the two signed directions.
        assert_eq!(report.rays % 2, 0);
    }

    #[test]
    fn refining_directions_never_repairs_a_failed_verdict() {
        let grid = Grid::rectangle(
            [1.0, 1.0],
            [32, 32],
            OmegaSpec::Edges { edges: vec![Edge::Bottom], width: 0.1 },
        )
        .unwrap();
        // Doubling keeps every coarse angle in the fan, so a failure can
        // only persist.
        let mut seen_failure = false;
        for directions in [8, 16, 32] {
            let mut config = GccConfig::new(3.0, 1e-3);
            config.directions = directions;
            let report = check_gcc(&EuclideanMetric, &grid, &config).unwrap();
            if seen_failure {
                assert!(!report.satisfied);
            }
            seen_failure = seen_failure || !report.satisfied;
        }
        assert!(seen_failure);
    }

    #[test]
    fn no_damping_at_all_fails_with_the_first_ray_as_witness() {
        let grid = Grid::rectangle([1.0, 1.0], [16, 16], OmegaSpec::<f64>::Empty).unwrap();
        let report =
            check_gcc(&EuclideanMetric, &grid, &GccConfig::new(1.0, 1e-3)).unwrap();
        assert!(!report.satisfied);
        assert_eq!(report.hits, 0);
        assert!(report.t0_estimate.is_none());
    }

    #[test]
    fn hit_times_match_the_straight_line_oracle() {
        let grid = Grid::rectangle([1.0, 1.0], [32, 32], OmegaSpec::collar(0.1)).unwrap();
        // Collar cells are those whose center is within 0.1 of the boundary:
        // with h = 1/32 that is the outermost three cell rings, so omega
        // starts at the lattice line 3h from each side.
        let h = 1.0 / 32.0;
        let edge = 3.0 * h;
        let exact = |x0: Vec2<f64>, v: Vec2<f64>| -> f64 {
            let mut t = f64::INFINITY;
            if v.x < 0.0 {
                t = t.min((x0.x - edge) / -v.x);
            }
            if v.x > 0.0 {
                t = t.min((1.0 - edge - x0.x) / v.x);
            }
            if v.y < 0.0 {
                t = t.min((x0.y - edge) / -v.y);
            }
            if v.y > 0.0 {
                t = t.min((1.0 - edge - x0.y) / v.y);
            }
            t
        };
        for (x0, dir) in [
            (Vec2::new(0.515625, 0.515625), Vec2::new(1.0, 0.0)),
            (Vec2::new(0.515625, 0.515625), Vec2::new(-0.6, -0.8)),
            (Vec2::new(0.265625, 0.703125), Vec2::new(0.8, 0.6)),
        ] {
            let path = geodesic_flow(
                &EuclideanMetric,
                x0,
                dir,
                1e-3,
                3.0,
                RayStop::GridOmega(&grid),
            )
            .unwrap();
            let t_exact = exact(x0, dir);
            match path.exit {
                PathExit::HitOmega { t } => {
                    assert!((t - t_exact).abs() <= 1e-3 + 1e-9, "hit {t} vs exact {t_exact}");
                }
                other => panic!("expected a hit, got {other:?}"),
            }
        }
    }
}
