//! Assembly of the spatial operators on nodal vectors and the shifted
//! elliptic form solved by the implicit integrator.
//!
//! `div(c grad u)` is discretized by second-order flux differencing. The
//! gradient is differenced between neighboring nodes; the flux coefficient
//! on each dual face comes from the cells that face touches: the harmonic
//! mean of the two touching cells where the face lies on a cell interface
//! (2D), the single containing cell otherwise (1D, and faces on the domain
//! boundary). Harmonic averaging keeps the operator symmetric negative
//! semidefinite for discontinuous coefficients and is exact for layered
//! two-material interface problems; for a constant coefficient it reduces
//! to the ordinary centered stencil, e.g. (1, -2, 1)/h^2 in 1D.
//!
//! Off-diagonal stiffness entries (full-tensor K) are handled by centered
//! cross-differences with the corner coefficient averaged to nodes. This
//! part is second-order and symmetric but not an M-matrix; positive
//! definiteness of the combined form is asserted numerically per run.
//!
//! Dirichlet rows and columns are cleared and the diagonal set to one, so
//! all vectors stay full-length.

use crate::coeffs::CoefficientSet;
use crate::grid::Grid;
use crate::linalg::SymMat;
use crate::scalar::Real;
use crate::sparse::{pcg, Csr, Solution, SolveError, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// div(K grad .)
    Stiffness,
    /// div(a grad .), damping of the first component.
    DampingU,
    /// div(b grad .), damping of the second component.
    DampingV,
    /// Pointwise multiplication by the node-averaged density.
    Mass,
}

/// A dual-grid face between two neighboring nodes, together with the cells
/// that supply its flux coefficient.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Face {
    pub nodes: (usize, usize),
    pub cells: (usize, Option<usize>),
    pub axis: usize,
}

/// Visit every node-to-node face of the grid in a fixed deterministic order.
pub(crate) fn visit_faces<T: Real>(grid: &Grid<T>, mut f: impl FnMut(Face)) {
    let cells = grid.cells();
    if grid.dim() == 1 {
        for i in 0..cells[0] {
            f(Face {
                nodes: (i, i + 1),
                cells: (i, None),
                axis: 0,
            });
        }
        return;
    }
    let (nx, ny) = (cells[0], cells[1]);
    // faces along x: nodes (i,j)-(i+1,j); touching cells above and below
    for j in 0..=ny {
        for i in 0..nx {
            let cells = if j == 0 {
                (grid.cell_index(i, 0), None)
            } else if j == ny {
                (grid.cell_index(i, ny - 1), None)
            } else {
                (grid.cell_index(i, j - 1), Some(grid.cell_index(i, j)))
            };
            f(Face {
                nodes: (grid.node_index(i, j), grid.node_index(i + 1, j)),
                cells,
                axis: 0,
            });
        }
    }
    // faces along y: nodes (i,j)-(i,j+1); touching cells left and right
    for j in 0..ny {
        for i in 0..=nx {
            let cells = if i == 0 {
                (grid.cell_index(0, j), None)
            } else if i == nx {
                (grid.cell_index(nx - 1, j), None)
            } else {
                (grid.cell_index(i - 1, j), Some(grid.cell_index(i, j)))
            };
            f(Face {
                nodes: (grid.node_index(i, j), grid.node_index(i, j + 1)),
                cells,
                axis: 1,
            });
        }
    }
}

/// Flux coefficient on a face: harmonic mean when two cells touch it.
pub(crate) fn face_value<T: Real>(c0: T, c1: Option<T>) -> T {
    match c1 {
        None => c0,
        Some(c1) => {
            let s = c0 + c1;
            if s > T::zero() {
                T::of(2.0) * c0 * c1 / s
            } else {
                T::zero()
            }
        }
    }
}

/// Off-diagonal stiffness coefficient averaged to a node corner.
pub(crate) fn corner_xy<T: Real>(grid: &Grid<T>, k: &[SymMat<T>], i: usize, j: usize) -> T {
    let cells = grid.cells();
    let (nx, ny) = (cells[0], cells[1]);
    let mut sum = T::zero();
    let mut count = 0;
    for cj in j.saturating_sub(1)..=j.min(ny - 1) {
        for ci in i.saturating_sub(1)..=i.min(nx - 1) {
            sum += k[grid.cell_index(ci, cj)].xy;
            count += 1;
        }
    }
    sum / T::of(count as f64)
}

/// Per-cell coefficient of a divergence-form operator.
#[derive(Clone, Copy)]
pub enum CellField<'a, T> {
    Scalar(&'a [T]),
    Tensor(&'a [SymMat<T>]),
}

#[derive(Clone, Debug)]
pub struct SparseOperator<T> {
    kind: OperatorKind,
    matrix: Csr<T>,
}

impl<T: Real> SparseOperator<T> {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &Csr<T> {
        &self.matrix
    }

    /// y = L x.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        self.matrix.matvec(x, y);
    }

    /// x . (-L x): for divergence-form kinds this is the (nonnegative)
    /// quadrature of c |grad x|^2 when x vanishes on Dirichlet nodes.
    pub fn neg_quad(&self, x: &[T]) -> T {
        -self.matrix.quad(x)
    }

    pub fn neg_quad_with(&self, x: &[T], scratch: &mut Vec<T>) -> T {
        -self.matrix.quad_with(x, scratch)
    }

    /// Coordinate-format dump of the stored matrix.
    pub fn dump(&self, w: impl Write) -> std::io::Result<()> {
        self.matrix.dump_triplets(w)
    }
}

/// Assemble `div(c grad .)` with Dirichlet rows and columns replaced by the
/// identity with zero coupling.
pub fn assemble_div_grad<T: Real>(
    grid: &Grid<T>,
    field: CellField<T>,
    kind: OperatorKind,
) -> SparseOperator<T> {
    let n = grid.num_nodes();
    let h = grid.spacing();
    // upper-triangle triplets of the negated (positive semidefinite) form
    let mut neg = Vec::new();

    visit_faces(grid, |face| {
        let pick = |cell: usize| match field {
            CellField::Scalar(v) => v[cell],
            CellField::Tensor(k) => {
                if face.axis == 0 {
                    k[cell].xx
                } else {
                    k[cell].yy
                }
            }
        };
        let cf = face_value(pick(face.cells.0), face.cells.1.map(pick));
        let w = cf / (h[face.axis] * h[face.axis]);
        let (n0, n1) = face.nodes;
        let d0 = grid.is_dirichlet(n0);
        let d1 = grid.is_dirichlet(n1);
        if !d0 {
            neg.push((n0, n0, w));
        }
        if !d1 {
            neg.push((n1, n1, w));
        }
        if !d0 && !d1 {
            neg.push((n0.min(n1), n0.max(n1), -w));
        }
    });

    if let CellField::Tensor(k) = field {
        if grid.dim() == 2 && k.iter().any(|m| m.xy != T::zero()) {
            let nodes = grid.nodes_per_axis();
            let quarter = T::one() / (T::of(4.0) * h[0] * h[1]);
            for j in 1..nodes[1] - 1 {
                for i in 1..nodes[0] - 1 {
                    let kappa = corner_xy(grid, k, i, j);
                    if kappa == T::zero() {
                        continue;
                    }
                    let xs = [(grid.node_index(i + 1, j), T::one()), (grid.node_index(i - 1, j), -T::one())];
                    let ys = [(grid.node_index(i, j + 1), T::one()), (grid.node_index(i, j - 1), -T::one())];
                    for &(r, sr) in &xs {
                        for &(c, sc) in &ys {
                            if grid.is_dirichlet(r) || grid.is_dirichlet(c) {
                                continue;
                            }
                            // the symmetric pair D_x' k D_y + D_y' k D_x
                            // contributes the same value at (r,c) and (c,r)
                            neg.push((r.min(c), r.max(c), kappa * sr * sc * quarter));
                        }
                    }
                }
            }
        }
    }

    let mut trips: Vec<(usize, usize, T)> =
        neg.into_iter().map(|(i, j, v)| (i, j, -v)).collect();
    for node in 0..n {
        if grid.is_dirichlet(node) {
            trips.push((node, node, T::one()));
        }
    }
    SparseOperator {
        kind,
        matrix: Csr::from_upper_triplets(n, trips),
    }
}

/// Density averaged from cells to each node (the node's share of rho).
pub fn node_density<T: Real>(grid: &Grid<T>, coeffs: &CoefficientSet<T>) -> Vec<T> {
    let cells = grid.cells();
    let (nx, ny) = (cells[0], cells[1]);
    (0..grid.num_nodes())
        .map(|node| {
            let (i, j) = grid.node_coords(node);
            let mut sum = T::zero();
            let mut count = 0;
            if grid.dim() == 1 {
                for ci in i.saturating_sub(1)..=i.min(nx - 1) {
                    sum += coeffs.rho()[ci];
                    count += 1;
                }
            } else {
                for cj in j.saturating_sub(1)..=j.min(ny - 1) {
                    for ci in i.saturating_sub(1)..=i.min(nx - 1) {
                        sum += coeffs.rho()[grid.cell_index(ci, cj)];
                        count += 1;
                    }
                }
            }
            sum / T::of(count as f64)
        })
        .collect()
}

/// Diagonal mass operator: pointwise multiplication by node density.
pub fn assemble_mass<T: Real>(grid: &Grid<T>, coeffs: &CoefficientSet<T>) -> SparseOperator<T> {
    let rho = node_density(grid, coeffs);
    let trips = rho
        .into_iter()
        .enumerate()
        .map(|(i, r)| (i, i, r))
        .collect();
    SparseOperator {
        kind: OperatorKind::Mass,
        matrix: Csr::from_upper_triplets(grid.num_nodes(), trips),
    }
}

/// The four assembled operators of one problem instance plus the node
/// density they share.
#[derive(Clone, Debug)]
pub struct OperatorSet<T> {
    pub mass: SparseOperator<T>,
    pub stiffness: SparseOperator<T>,
    pub damping_u: SparseOperator<T>,
    pub damping_v: SparseOperator<T>,
    rho_node: Vec<T>,
}

impl<T: Real> OperatorSet<T> {
    pub fn assemble(grid: &Grid<T>, coeffs: &CoefficientSet<T>) -> Self {
        let rho_node = node_density(grid, coeffs);
        let trips = rho_node
            .iter()
            .enumerate()
            .map(|(i, &r)| (i, i, r))
            .collect();
        OperatorSet {
            mass: SparseOperator {
                kind: OperatorKind::Mass,
                matrix: Csr::from_upper_triplets(grid.num_nodes(), trips),
            },
            stiffness: assemble_div_grad(grid, CellField::Tensor(coeffs.k()), OperatorKind::Stiffness),
            damping_u: assemble_div_grad(grid, CellField::Scalar(coeffs.a()), OperatorKind::DampingU),
            damping_v: assemble_div_grad(grid, CellField::Scalar(coeffs.b()), OperatorKind::DampingV),
            rho_node,
        }
    }

    pub fn rho_node(&self) -> &[T] {
        &self.rho_node
    }
}

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("stiffness weight must be positive, got {got}")]
    NonPositiveStiffnessWeight { got: f64 },
    #[error("damping weight must be nonnegative, got {got}")]
    NegativeDampingWeight { got: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// The shifted elliptic form `rho I - w1 div(K grad .) - w2 div(a grad .)`
/// with identity Dirichlet rows. One linear solve of the implicit integrator
/// is one application of its inverse; it is symmetric positive definite for
/// any positive stiffness weight and nonnegative damping weight.
#[derive(Clone, Debug)]
pub struct ResolventForm<T> {
    matrix: Csr<T>,
    stiffness_weight: T,
    damping_weight: T,
}

pub fn assemble_resolvent<T: Real>(
    grid: &Grid<T>,
    mass: &SparseOperator<T>,
    stiffness: &SparseOperator<T>,
    damping: &SparseOperator<T>,
    stiffness_weight: T,
    damping_weight: T,
) -> Result<ResolventForm<T>, OperatorError> {
    assert_eq!(mass.kind(), OperatorKind::Mass);
    assert_eq!(stiffness.kind(), OperatorKind::Stiffness);
    if !(stiffness_weight > T::zero()) {
        return Err(OperatorError::NonPositiveStiffnessWeight {
            got: stiffness_weight.as_f64(),
        });
    }
    if damping_weight < T::zero() {
        return Err(OperatorError::NegativeDampingWeight {
            got: damping_weight.as_f64(),
        });
    }
    let n = grid.num_nodes();
    let mut trips = Vec::new();
    for row in 0..n {
        if grid.is_dirichlet(row) {
            trips.push((row, row, T::one()));
            continue;
        }
        trips.push((row, row, mass.matrix().entry(row, row)));
        for (col, v) in stiffness.matrix().row(row) {
            trips.push((row, col, -stiffness_weight * v));
        }
        if damping_weight > T::zero() {
            for (col, v) in damping.matrix().row(row) {
                trips.push((row, col, -damping_weight * v));
            }
        }
    }
    Ok(ResolventForm {
        matrix: Csr::from_triplets(n, trips),
        stiffness_weight,
        damping_weight,
    })
}

impl<T: Real> ResolventForm<T> {
    pub fn matrix(&self) -> &Csr<T> {
        &self.matrix
    }

    pub fn weights(&self) -> (T, T) {
        (self.stiffness_weight, self.damping_weight)
    }

    pub fn solve(
        &self,
        b: &[T],
        x0: Option<&[T]>,
        opts: SolveOptions<T>,
    ) -> Result<Solution<T>, SolveError> {
        pcg(&self.matrix, b, x0, opts)
    }

    /// Cheap positive definiteness check: random probe vectors must all give
    /// a positive quadratic form. Used when cross-difference stiffness terms
    /// void the M-matrix guarantee.
    pub fn spd_probe(&self, probes: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.matrix.n();
        let mut scratch = Vec::new();
        for _ in 0..probes {
            let z: Vec<T> = (0..n)
                .map(|_| T::of(rng.random_range(-1.0..1.0)))
                .collect();
            if !(self.matrix.quad_with(&z, &mut scratch) > T::zero()) {
                return false;
            }
        }
        true
    }

    /// Smallest eigenvalue by inverse power iteration (diagnostic; cost is
    /// one solve per iteration).
    pub fn min_eigenvalue_estimate(&self, iters: usize, seed: u64) -> Result<T, SolveError> {
        let n = self.matrix.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<T> = (0..n)
            .map(|_| T::of(rng.random_range(-1.0..1.0)))
            .collect();
        normalize(&mut x);
        for _ in 0..iters {
            let sol = pcg(&self.matrix, &x, None, SolveOptions::default())?;
            x = sol.x;
            normalize(&mut x);
        }
        Ok(self.matrix.quad(&x))
    }
}

fn normalize<T: Real>(x: &mut [T]) {
    let n = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if n > T::zero() {
        for v in x.iter_mut() {
            *v = *v / n;
        }
    }
}

/// Right-hand side of one resolvent solve from data fields `(p, r)`:
/// `rho (p + r) - w2 div(a grad p)` on interior rows, zero on Dirichlet rows.
pub fn resolvent_rhs<T: Real>(
    grid: &Grid<T>,
    mass: &SparseOperator<T>,
    damping: &SparseOperator<T>,
    damping_weight: T,
    p: &[T],
    r: &[T],
) -> Vec<T> {
    let n = grid.num_nodes();
    let mut lap = vec![T::zero(); n];
    damping.apply(p, &mut lap);
    (0..n)
        .map(|i| {
            if grid.is_dirichlet(i) {
                T::zero()
            } else {
                mass.matrix().entry(i, i) * (p[i] + r[i]) - damping_weight * lap[i]
            }
        })
        .collect()
}
