//! Material coefficient fields sampled per cell: density `rho`, symmetric
//! stiffness tensor `K`, and the two viscous damping profiles `a`, `b`.
//!
//! Sampling validates the structural assumptions the solvers rely on
//! (positive density, symmetric positive definite K, nonnegative damping)
//! and records the extremal bounds by enumeration over cell centers.

use crate::grid::Grid;
use crate::linalg::{SymMat, Vec2};
use crate::scalar::Real;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoeffError {
    #[error("density must be positive; cell {cell} has rho = {value}")]
    NonPositiveDensity { cell: usize, value: f64 },
    #[error("stiffness tensor must be symmetric; cell {cell} has k12 = {k12}, k21 = {k21}")]
    AsymmetricTensor { cell: usize, k12: f64, k21: f64 },
    #[error("stiffness tensor must be positive definite; cell {cell} has min eigenvalue {min_eigenvalue}")]
    NonPositiveTensor { cell: usize, min_eigenvalue: f64 },
    #[error("damping profile {field} must be nonnegative; cell {cell} has value {value}")]
    NegativeDamping { field: char, cell: usize, value: f64 },
    #[error("damping must be strictly positive on the damping region: {reason}")]
    IneffectiveDamping { reason: String },
    #[error("coefficient table line {line}: {msg}")]
    Table { line: usize, msg: String },
}

/// Extremal values of the sampled fields, enumerated over cell centers.
#[derive(Clone, Copy, Debug)]
pub struct CoefficientBounds<T> {
    pub rho_min: T,
    pub rho_max: T,
    /// Smallest eigenvalue of K over all cells.
    pub k_min: T,
    /// Largest eigenvalue of K over all cells.
    pub k_max: T,
    /// min of `a` over damping cells; None when the region is empty.
    pub a_min_omega: Option<T>,
    pub b_min_omega: Option<T>,
}

#[derive(Clone, Debug)]
pub struct CoefficientSet<T> {
    rho: Vec<T>,
    k: Vec<SymMat<T>>,
    a: Vec<T>,
    b: Vec<T>,
    bounds: CoefficientBounds<T>,
    dim: usize,
}

impl<T: Real> CoefficientSet<T> {
    /// Sample all four fields at cell centers. `k_fn` returns a full matrix
    /// so that accidental asymmetry in a user-supplied field is caught here;
    /// in one dimension only the `[0][0]` entry is read.
    pub fn sample(
        grid: &Grid<T>,
        rho_fn: impl Fn(Vec2<T>) -> T,
        k_fn: impl Fn(Vec2<T>) -> [[T; 2]; 2],
        a_fn: impl Fn(Vec2<T>) -> T,
        b_fn: impl Fn(Vec2<T>) -> T,
    ) -> Result<Self, CoeffError> {
        let nc = grid.num_cells();
        let mut rho = Vec::with_capacity(nc);
        let mut k = Vec::with_capacity(nc);
        let mut a = Vec::with_capacity(nc);
        let mut b = Vec::with_capacity(nc);
        for cell in 0..nc {
            let x = grid.cell_center(cell);
            rho.push(rho_fn(x));
            let m = k_fn(x);
            k.push(Self::validate_tensor(grid.dim(), cell, m)?);
            a.push(a_fn(x));
            b.push(b_fn(x));
        }
        Self::from_cell_values(grid, rho, k, a, b)
    }

    /// Assemble from per-cell arrays (row-major cell order).
    pub fn from_cell_values(
        grid: &Grid<T>,
        rho: Vec<T>,
        k: Vec<SymMat<T>>,
        a: Vec<T>,
        b: Vec<T>,
    ) -> Result<Self, CoeffError> {
        let nc = grid.num_cells();
        assert_eq!(rho.len(), nc);
        assert_eq!(k.len(), nc);
        assert_eq!(a.len(), nc);
        assert_eq!(b.len(), nc);
        for cell in 0..nc {
            if !(rho[cell] > T::zero()) {
                return Err(CoeffError::NonPositiveDensity {
                    cell,
                    value: rho[cell].as_f64(),
                });
            }
            let (lo, _) = Self::tensor_eigs(grid.dim(), k[cell]);
            if !(lo > T::zero()) {
                return Err(CoeffError::NonPositiveTensor {
                    cell,
                    min_eigenvalue: lo.as_f64(),
                });
            }
            for (field, vals) in [('a', &a), ('b', &b)] {
                if vals[cell] < T::zero() {
                    return Err(CoeffError::NegativeDamping {
                        field,
                        cell,
                        value: vals[cell].as_f64(),
                    });
                }
            }
        }

        let mut bounds = CoefficientBounds {
            rho_min: rho[0],
            rho_max: rho[0],
            k_min: T::infinity(),
            k_max: T::neg_infinity(),
            a_min_omega: None,
            b_min_omega: None,
        };
        for cell in 0..nc {
            bounds.rho_min = bounds.rho_min.min(rho[cell]);
            bounds.rho_max = bounds.rho_max.max(rho[cell]);
            let (lo, hi) = Self::tensor_eigs(grid.dim(), k[cell]);
            bounds.k_min = bounds.k_min.min(lo);
            bounds.k_max = bounds.k_max.max(hi);
            if grid.omega_mask()[cell] {
                bounds.a_min_omega = Some(match bounds.a_min_omega {
                    Some(m) => m.min(a[cell]),
                    None => a[cell],
                });
                bounds.b_min_omega = Some(match bounds.b_min_omega {
                    Some(m) => m.min(b[cell]),
                    None => b[cell],
                });
            }
        }

        Ok(CoefficientSet {
            rho,
            k,
            a,
            b,
            bounds,
            dim: grid.dim(),
        })
    }

    fn validate_tensor(dim: usize, cell: usize, m: [[T; 2]; 2]) -> Result<SymMat<T>, CoeffError> {
        if dim == 1 {
            return Ok(SymMat::new(m[0][0], T::zero(), T::zero()));
        }
        let scale = m
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
            .max(T::one());
        let tol = T::of(8.0) * T::epsilon() * scale;
        if (m[0][1] - m[1][0]).abs() > tol {
            return Err(CoeffError::AsymmetricTensor {
                cell,
                k12: m[0][1].as_f64(),
                k21: m[1][0].as_f64(),
            });
        }
        Ok(SymMat::new(m[0][0], m[0][1], m[1][1]))
    }

    fn tensor_eigs(dim: usize, k: SymMat<T>) -> (T, T) {
        if dim == 1 {
            (k.xx, k.xx)
        } else {
            k.eigenvalues()
        }
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn k(&self) -> &[SymMat<T>] {
        &self.k
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn bounds(&self) -> &CoefficientBounds<T> {
        &self.bounds
    }

    /// True when any cell carries a nonzero off-diagonal stiffness entry.
    pub fn has_cross_terms(&self) -> bool {
        self.dim == 2 && self.k.iter().any(|m| m.xy != T::zero())
    }

    /// Wave tensor K/rho of one cell; its inverse is the travel-time metric.
    pub fn wave_tensor(&self, cell: usize) -> SymMat<T> {
        let mut h = self.k[cell].scaled(T::one() / self.rho[cell]);
        if self.dim == 1 {
            h.yy = T::one();
            h.xy = T::zero();
        }
        h
    }

    /// Check that both damping profiles are bounded away from zero on a
    /// nonempty damping region. Damping experiments require this; undamped
    /// control runs legitimately skip it.
    pub fn require_effective_damping(&self) -> Result<(), CoeffError> {
        match (self.bounds.a_min_omega, self.bounds.b_min_omega) {
            (None, _) | (_, None) => Err(CoeffError::IneffectiveDamping {
                reason: "the damping region is empty".into(),
            }),
            (Some(a0), Some(b0)) => {
                if a0 > T::zero() && b0 > T::zero() {
                    Ok(())
                } else {
                    Err(CoeffError::IneffectiveDamping {
                        reason: format!(
                            "min a on region = {}, min b on region = {}",
                            a0.as_f64(),
                            b0.as_f64()
                        ),
                    })
                }
            }
        }
    }

    /// Write the fields as a plain text table, one row per cell.
    pub fn save_table(&self, grid: &Grid<T>, mut w: impl Write) -> std::io::Result<()> {
        let cells = grid.cells();
        match self.dim {
            1 => writeln!(w, "cells {}", cells[0])?,
            _ => writeln!(w, "cells {} {}", cells[0], cells[1])?,
        }
        writeln!(w, "# columns: rho k11 [k12 k22] a b")?;
        for c in 0..grid.num_cells() {
            if self.dim == 1 {
                writeln!(
                    w,
                    "{:.17e} {:.17e} {:.17e} {:.17e}",
                    self.rho[c], self.k[c].xx, self.a[c], self.b[c]
                )?;
            } else {
                writeln!(
                    w,
                    "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                    self.rho[c], self.k[c].xx, self.k[c].xy, self.k[c].yy, self.a[c], self.b[c]
                )?;
            }
        }
        Ok(())
    }

    /// Parse a table produced by [`save_table`] (or written by hand) against
    /// an existing grid.
    pub fn load_table(grid: &Grid<T>, r: impl BufRead) -> Result<Self, CoeffError> {
        let mut rho = Vec::new();
        let mut k = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut saw_header = false;
        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| CoeffError::Table {
                line: lineno,
                msg: e.to_string(),
            })?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if !saw_header {
                let mut parts = body.split_whitespace();
                if parts.next() != Some("cells") {
                    return Err(CoeffError::Table {
                        line: lineno,
                        msg: "expected header starting with 'cells'".into(),
                    });
                }
                let counts: Vec<usize> = parts
                    .map(|p| {
                        p.parse().map_err(|_| CoeffError::Table {
                            line: lineno,
                            msg: format!("bad cell count '{p}'"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let want: Vec<usize> = match grid.dim() {
                    1 => vec![grid.cells()[0]],
                    _ => vec![grid.cells()[0], grid.cells()[1]],
                };
                if counts != want {
                    return Err(CoeffError::Table {
                        line: lineno,
                        msg: format!("table is for cells {counts:?}, grid has {want:?}"),
                    });
                }
                saw_header = true;
                continue;
            }
            let vals: Vec<T> = body
                .split_whitespace()
                .map(|p| {
                    p.parse::<f64>().map(T::of).map_err(|_| CoeffError::Table {
                        line: lineno,
                        msg: format!("bad number '{p}'"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let want_cols = if grid.dim() == 1 { 4 } else { 6 };
            if vals.len() != want_cols {
                return Err(CoeffError::Table {
                    line: lineno,
                    msg: format!("expected {want_cols} columns, got {}", vals.len()),
                });
            }
            rho.push(vals[0]);
            if grid.dim() == 1 {
                k.push(SymMat::new(vals[1], T::zero(), T::zero()));
                a.push(vals[2]);
                b.push(vals[3]);
            } else {
                k.push(SymMat::new(vals[1], vals[2], vals[3]));
                a.push(vals[4]);
                b.push(vals[5]);
            }
        }
        if !saw_header {
            return Err(CoeffError::Table {
                line: 0,
                msg: "missing 'cells' header".into(),
            });
        }
        if rho.len() != grid.num_cells() {
            return Err(CoeffError::Table {
                line: 0,
                msg: format!("{} rows for {} cells", rho.len(), grid.num_cells()),
            });
        }
        Self::from_cell_values(grid, rho, k, a, b)
    }
}

/// Named coefficient presets.
pub mod presets {
    use super::*;

    /// Homogeneous medium: rho and isotropic K constant, damping `strength`
    /// on the damping cells and zero elsewhere.
    pub fn constant<T: Real>(
        grid: &Grid<T>,
        rho: T,
        k: T,
        strength: T,
    ) -> Result<CoefficientSet<T>, CoeffError> {
        per_cell(grid, |_, _| (rho, SymMat::diag(k, k)), strength)
    }

    /// Diagonal stiffness growing linearly along each axis:
    /// K = diag(base_x + slope_x * x, base_y + slope_y * y), rho = 1.
    pub fn diag_linear<T: Real>(
        grid: &Grid<T>,
        base: [T; 2],
        slope: [T; 2],
        strength: T,
    ) -> Result<CoefficientSet<T>, CoeffError> {
        per_cell(
            grid,
            |_, x| {
                (
                    T::one(),
                    SymMat::diag(base[0] + slope[0] * x.x, base[1] + slope[1] * x.y),
                )
            },
            strength,
        )
    }

    /// Isotropic K with density 1/(y + y0)^2: the travel-time metric of this
    /// medium is the hyperbolic half-plane metric in the shifted coordinate
    /// y + y0.
    pub fn hyperbolic_halfplane<T: Real>(
        grid: &Grid<T>,
        y0: T,
        strength: T,
    ) -> Result<CoefficientSet<T>, CoeffError> {
        per_cell(
            grid,
            |_, x| {
                let s = x.y + y0;
                (T::one() / (s * s), SymMat::identity())
            },
            strength,
        )
    }

    fn per_cell<T: Real>(
        grid: &Grid<T>,
        f: impl Fn(usize, Vec2<T>) -> (T, SymMat<T>),
        strength: T,
    ) -> Result<CoefficientSet<T>, CoeffError> {
        let nc = grid.num_cells();
        let mut rho = Vec::with_capacity(nc);
        let mut k = Vec::with_capacity(nc);
        let mut a = Vec::with_capacity(nc);
        for cell in 0..nc {
            let (r, m) = f(cell, grid.cell_center(cell));
            rho.push(r);
            k.push(if grid.dim() == 1 {
                SymMat::new(m.xx, T::zero(), T::zero())
            } else {
                m
            });
            a.push(if grid.omega_mask()[cell] {
                strength
            } else {
                T::zero()
            });
        }
        let b = a.clone();
        CoefficientSet::from_cell_values(grid, rho, k, a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::OmegaSpec;
    use approx::assert_relative_eq;
    use std::io::BufReader;

    #[test]
    fn constant_preset_bounds() {
        let g = Grid::line(1.0, 8, OmegaSpec::collar(0.2)).unwrap();
        let c = presets::constant(&g, 2.0, 3.0, 0.5).unwrap();
        let b = c.bounds();
        assert_eq!(b.rho_min, 2.0);
        assert_eq!(b.rho_max, 2.0);
        assert_eq!(b.k_min, 3.0);
        assert_eq!(b.k_max, 3.0);
        assert_eq!(b.a_min_omega, Some(0.5));
        assert_eq!(b.b_min_omega, Some(0.5));
        c.require_effective_damping().unwrap();
    }

    #[test]
    fn diag_linear_bounds_are_enumerated_over_cell_centers() {
        // K = diag(1 + x, 2) on a 4x4 grid of the unit square. The smallest
        // eigenvalue seen at a cell center is 1 + h/2 with h = 1/4.
        let g = Grid::rectangle([1.0, 1.0], [4, 4], OmegaSpec::<f64>::Empty).unwrap();
        let c = presets::diag_linear(&g, [1.0, 2.0], [1.0, 0.0], 0.0).unwrap();
        let b = c.bounds();
        assert_relative_eq!(b.k_min, 1.125, max_relative = 1e-15);
        assert_relative_eq!(b.k_max, 2.0, max_relative = 1e-15);
        assert_eq!(b.rho_min, 1.0);
    }

    #[test]
    fn asymmetric_tensor_reports_first_violating_cell() {
        let g = Grid::rectangle([1.0, 1.0], [3, 3], OmegaSpec::<f64>::Empty).unwrap();
        let r = CoefficientSet::sample(
            &g,
            |_| 1.0,
            |x| {
                if x.x > 0.5 && x.y > 0.5 {
                    [[1.0, 0.2], [0.1, 1.0]]
                } else {
                    [[1.0, 0.0], [0.0, 1.0]]
                }
            },
            |_| 0.0,
            |_| 0.0,
        );
        match r {
            Err(CoeffError::AsymmetricTensor { cell, .. }) => assert_eq!(cell, 8),
            other => panic!("expected asymmetry error, got {other:?}"),
        }
    }

    #[test]
    fn indefinite_tensor_rejected() {
        let g = Grid::rectangle([1.0, 1.0], [2, 2], OmegaSpec::<f64>::Empty).unwrap();
        let r = CoefficientSet::sample(
            &g,
            |_| 1.0,
            |_| [[1.0, 2.0], [2.0, 1.0]],
            |_| 0.0,
            |_| 0.0,
        );
        assert!(matches!(r, Err(CoeffError::NonPositiveTensor { cell: 0, .. })));
    }

    #[test]
    fn zero_damping_on_region_is_sampled_but_flagged_ineffective() {
        let g = Grid::line(1.0, 10, OmegaSpec::collar(0.1)).unwrap();
        let c = presets::constant(&g, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(c.bounds().a_min_omega, Some(0.0));
        assert!(c.require_effective_damping().is_err());
    }

    #[test]
    fn hyperbolic_density_matches_shifted_height() {
        let g = Grid::rectangle([1.0, 1.0], [4, 4], OmegaSpec::<f64>::Empty).unwrap();
        let c = presets::hyperbolic_halfplane(&g, 1.0, 0.0).unwrap();
        let cell = g.cell_index(1, 2);
        let y = g.cell_center(cell).y;
        assert_relative_eq!(c.rho()[cell], 1.0 / ((y + 1.0) * (y + 1.0)), max_relative = 1e-15);
    }

    #[test]
    fn table_roundtrip_is_exact() {
        let g = Grid::rectangle([1.0, 2.0], [3, 5], OmegaSpec::collar(0.3)).unwrap();
        let c = presets::diag_linear(&g, [1.0, 2.0], [0.7, 0.3], 0.25).unwrap();
        let mut buf = Vec::new();
        c.save_table(&g, &mut buf).unwrap();
        let c2 = CoefficientSet::load_table(&g, BufReader::new(&buf[..])).unwrap();
        assert_eq!(c.rho(), c2.rho());
        assert_eq!(c.k(), c2.k());
        assert_eq!(c.a(), c2.a());
        assert_eq!(c.b(), c2.b());
    }

    #[test]
    fn one_dimensional_tables_have_four_columns() {
        let g = Grid::line(1.0, 4, OmegaSpec::collar(0.25)).unwrap();
        let c = presets::constant(&g, 1.5, 2.0, 1.0).unwrap();
        let mut buf = Vec::new();
        c.save_table(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let data_line = text.lines().nth(2).unwrap();
        assert_eq!(data_line.split_whitespace().count(), 4);
        let c2 = CoefficientSet::load_table(&g, BufReader::new(&buf[..])).unwrap();
        assert_eq!(c.rho(), c2.rho());
    }
}
