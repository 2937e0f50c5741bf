//! Metric models: closed-form metrics and the interpolant of cell-sampled
//! wave tensors.

use crate::coeffs::CoefficientSet;
use crate::grid::Grid;
use crate::linalg::{SymMat, Vec2};
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Point-evaluable metric with first derivatives.
///
/// `g` must be symmetric positive definite wherever a consumer queries it;
/// ray tracing verifies this along each path and aborts on failure. `dg`
/// returns
/// the coordinate partials [dG/dx, dG/dy]. The inverse H and its partials
/// have default implementations via dH_i = -H dG_i H; metrics with cheap
/// closed forms override them.
pub trait Metric<T: Real>: Sync {
    fn g(&self, x: Vec2<T>) -> SymMat<T>;

    fn dg(&self, x: Vec2<T>) -> [SymMat<T>; 2];

    fn h(&self, x: Vec2<T>) -> SymMat<T> {
        self.g(x).inverse().expect("metric must be invertible where queried")
    }

    fn dh(&self, x: Vec2<T>) -> [SymMat<T>; 2] {
        let h = self.h(x);
        let d = self.dg(x);
        let minus = -T::one();
        [h.sandwich(d[0]).scaled(minus), h.sandwich(d[1]).scaled(minus)]
    }
}

/// G = I: rays are straight lines at unit Euclidean speed.
#[derive(Clone, Copy, Debug, Default)]
pub struct EuclideanMetric;

impl<T: Real> Metric<T> for EuclideanMetric {
    fn g(&self, _x: Vec2<T>) -> SymMat<T> {
        SymMat::identity()
    }

    fn dg(&self, _x: Vec2<T>) -> [SymMat<T>; 2] {
        let z = SymMat::diag(T::zero(), T::zero());
        [z, z]
    }

    fn h(&self, _x: Vec2<T>) -> SymMat<T> {
        SymMat::identity()
    }

    fn dh(&self, _x: Vec2<T>) -> [SymMat<T>; 2] {
        let z = SymMat::diag(T::zero(), T::zero());
        [z, z]
    }
}

/// Half plane y > 0 with G = I / y^2. Its geodesics are the vertical lines
/// and the semicircles centered on the x axis, which makes it the standard
/// closed-form oracle for the ray tracer.
#[derive(Clone, Copy, Debug, Default)]
pub struct HyperbolicMetric;

impl<T: Real> Metric<T> for HyperbolicMetric {
    fn g(&self, x: Vec2<T>) -> SymMat<T> {
        let s = T::one() / (x.y * x.y);
        SymMat::diag(s, s)
    }

    fn dg(&self, x: Vec2<T>) -> [SymMat<T>; 2] {
        let d = T::of(-2.0) / (x.y * x.y * x.y);
        [SymMat::diag(T::zero(), T::zero()), SymMat::diag(d, d)]
    }

    fn h(&self, x: Vec2<T>) -> SymMat<T> {
        let s = x.y * x.y;
        SymMat::diag(s, s)
    }

    fn dh(&self, x: Vec2<T>) -> [SymMat<T>; 2] {
        let d = T::of(2.0) * x.y;
        [SymMat::diag(T::zero(), T::zero()), SymMat::diag(d, d)]
    }
}

/// Metric given by closures for G and its partials.
pub struct AnalyticMetric<G, D> {
    g: G,
    dg: D,
}

impl<G, D> AnalyticMetric<G, D> {
    pub fn new(g: G, dg: D) -> Self {
        AnalyticMetric { g, dg }
    }
}

impl<T, G, D> Metric<T> for AnalyticMetric<G, D>
where
    T: Real,
    G: Fn(Vec2<T>) -> SymMat<T> + Sync,
    D: Fn(Vec2<T>) -> [SymMat<T>; 2] + Sync,
{
    fn g(&self, x: Vec2<T>) -> SymMat<T> {
        (self.g)(x)
    }

    fn dg(&self, x: Vec2<T>) -> [SymMat<T>; 2] {
        (self.dg)(x)
    }
}

/// Metric sampled from the coefficients of a simulation grid.
///
/// G at each cell center is the inverse of that cell's wave tensor K/rho.
/// Queries interpolate bilinearly between centers and extend constantly
/// outside the center lattice, so G stays positive definite (any convex
/// combination of positive definite matrices is). Partials are centered
/// differences of the interpolant; the interpolant is piecewise linear, so
/// these are exact away from the lattice creases. Those creases cost the
/// ray integrator its smoothness assumption: expect speed drift around
/// 1e-4..1e-3 per unit time over genuinely varying tables, versus roundoff
/// for constant ones. Check `GeodesicPath::speed_drift_rate` when it
/// matters.
pub struct InterpolatedMetric<T> {
    dim: usize,
    cells: [usize; 2],
    spacing: [T; 2],
    g_cells: Vec<SymMat<T>>,
    fd_step: T,
}

impl<T: Real> InterpolatedMetric<T> {
    pub fn from_coefficients(grid: &Grid<T>, coeffs: &CoefficientSet<T>) -> Self {
        let g_cells = (0..grid.num_cells())
            .map(|cell| {
                coeffs
                    .wave_tensor(cell)
                    .inverse()
                    .expect("cell wave tensors are positive definite by construction")
            })
            .collect();
        InterpolatedMetric {
            dim: grid.dim(),
            cells: grid.cells(),
            spacing: grid.spacing(),
            g_cells,
            fd_step: T::of(1e-5),
        }
    }

    /// Lower lattice index and interpolation weight along one axis, clamped
    /// to the cell-center range.
    fn locate(coord: T, spacing: T, n: usize) -> (usize, T) {
        if n == 1 {
            return (0, T::zero());
        }
        let s = coord / spacing - T::of(0.5);
        let max_i = T::of((n - 2) as f64);
        let i = s.floor().max(T::zero()).min(max_i);
        let f = (s - i).max(T::zero()).min(T::one());
        (i.to_usize().unwrap_or(0), f)
    }

    fn interp(&self, x: Vec2<T>) -> SymMat<T> {
        let one = T::one();
        let (i0, fx) = Self::locate(x.x, self.spacing[0], self.cells[0]);
        let i1 = (i0 + 1).min(self.cells[0] - 1);
        if self.dim == 1 {
            return self.g_cells[i0]
                .scaled(one - fx)
                .add(self.g_cells[i1].scaled(fx));
        }
        let (j0, fy) = Self::locate(x.y, self.spacing[1], self.cells[1]);
        let j1 = (j0 + 1).min(self.cells[1] - 1);
        let at = |i: usize, j: usize| self.g_cells[i + j * self.cells[0]];
        at(i0, j0)
            .scaled((one - fx) * (one - fy))
            .add(at(i1, j0).scaled(fx * (one - fy)))
            .add(at(i0, j1).scaled((one - fx) * fy))
            .add(at(i1, j1).scaled(fx * fy))
    }
}

impl<T: Real> Metric<T> for InterpolatedMetric<T> {
    fn g(&self, x: Vec2<T>) -> SymMat<T> {
        self.interp(x)
    }

    fn dg(&self, x: Vec2<T>) -> [SymMat<T>; 2] {
        let h = self.fd_step;
        let half_inv = T::one() / (T::of(2.0) * h);
        let dx = self
            .interp(Vec2::new(x.x + h, x.y))
            .sub(self.interp(Vec2::new(x.x - h, x.y)))
            .scaled(half_inv);
        if self.dim == 1 {
            return [dx, SymMat::diag(T::zero(), T::zero())];
        }
        let dy = self
            .interp(Vec2::new(x.x, x.y + h))
            .sub(self.interp(Vec2::new(x.x, x.y - h)))
            .scaled(half_inv);
        [dx, dy]
    }
}

/// Largest componentwise gap between `dg` and a centered difference of `g`,
/// over points drawn uniformly from the box [lo, hi]. Spot check for
/// hand-written derivative closures.
pub fn max_derivative_defect<T: Real, M: Metric<T>>(
    metric: &M,
    lo: Vec2<T>,
    hi: Vec2<T>,
    samples: usize,
    step: T,
    seed: u64,
) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..samples {
        let x = Vec2::new(
            lo.x + (hi.x - lo.x) * T::of(rng.random_range(0.0..1.0)),
            lo.y + (hi.y - lo.y) * T::of(rng.random_range(0.0..1.0)),
        );
        let d = metric.dg(x);
        let half_inv = T::one() / (T::of(2.0) * step);
        let fd = [
            metric
                .g(Vec2::new(x.x + step, x.y))
                .sub(metric.g(Vec2::new(x.x - step, x.y)))
                .scaled(half_inv),
            metric
                .g(Vec2::new(x.x, x.y + step))
                .sub(metric.g(Vec2::new(x.x, x.y - step)))
                .scaled(half_inv),
        ];
        for axis in 0..2 {
            let e = d[axis].sub(fd[axis]);
            worst = worst.max(e.xx.abs()).max(e.xy.abs()).max(e.yy.abs());
        }
    }
    worst
}
