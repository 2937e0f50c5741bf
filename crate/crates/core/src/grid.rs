//! Uniform rectilinear meshes of an interval or an axis-aligned rectangle.
//!
//! Displacements live on nodes (cell vertices), material coefficients on
//! cells. The outermost node layer carries the homogeneous Dirichlet
//! condition. The damping support `omega` is a set of cells, normally a
//! collar of prescribed width along the whole boundary; one-sided and fully
//! custom masks are supported for counterexample studies.

use crate::linalg::Vec2;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("domain extent along axis {axis} must be positive, got {got}")]
    NonPositiveExtent { axis: usize, got: f64 },
    #[error("cell count along axis {axis} must be at least 1")]
    ZeroCells { axis: usize },
    #[error("damping region width must be nonnegative, got {got}")]
    NegativeWidth { got: f64 },
    #[error("damping collar of width {width} exceeds half the shortest extent {extent}")]
    CollarTooWide { width: f64, extent: f64 },
    #[error("custom damping mask has {got} entries but the grid has {expect} cells")]
    MaskLength { got: usize, expect: usize },
}

/// Sides of the rectangle (in 1D only `Left` and `Right` exist).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// How the damping support is carved out of the cell set.
#[derive(Clone, Debug)]
pub enum OmegaSpec<T> {
    /// No damping region.
    Empty,
    /// Cells whose center lies within `width` of any boundary point.
    Collar { width: T },
    /// Cells whose center lies within `width` of one of the listed edges.
    Edges { edges: Vec<Edge>, width: T },
    /// Explicit per-cell mask, row-major.
    Cells(Vec<bool>),
}

impl<T: Real> OmegaSpec<T> {
    pub fn collar(width: T) -> Self {
        OmegaSpec::Collar { width }
    }
}

#[derive(Clone, Debug)]
pub struct Grid<T> {
    dim: usize,
    extents: [T; 2],
    cells: [usize; 2],
    spacing: [T; 2],
    boundary_mask: Vec<bool>,
    omega_mask: Vec<bool>,
    omega_is_full_collar: bool,
}

impl<T: Real> Grid<T> {
    /// Interval [0, length] split into `n` cells.
    pub fn line(length: T, n: usize, omega: OmegaSpec<T>) -> Result<Self, GridError> {
        Self::build(1, [length, T::one()], [n, 1], omega)
    }

    /// Rectangle [0, lx] x [0, ly] split into nx x ny cells.
    pub fn rectangle(
        extents: [T; 2],
        cells: [usize; 2],
        omega: OmegaSpec<T>,
    ) -> Result<Self, GridError> {
        Self::build(2, extents, cells, omega)
    }

    fn build(
        dim: usize,
        extents: [T; 2],
        cells: [usize; 2],
        omega: OmegaSpec<T>,
    ) -> Result<Self, GridError> {
        assert!(dim == 1 || dim == 2, "only 1- and 2-dimensional grids");
        for axis in 0..dim {
            if !(extents[axis] > T::zero()) {
                return Err(GridError::NonPositiveExtent {
                    axis,
                    got: extents[axis].as_f64(),
                });
            }
            if cells[axis] == 0 {
                return Err(GridError::ZeroCells { axis });
            }
        }
        let spacing = [
            extents[0] / T::of(cells[0] as f64),
            extents[1] / T::of(cells[1] as f64),
        ];
        let mut grid = Grid {
            dim,
            extents,
            cells,
            spacing,
            boundary_mask: Vec::new(),
            omega_mask: Vec::new(),
            omega_is_full_collar: false,
        };
        grid.boundary_mask = (0..grid.num_nodes()).map(|n| grid.node_on_boundary(n)).collect();
        grid.omega_mask = grid.build_omega(&omega)?;
        grid.omega_is_full_collar = matches!(omega, OmegaSpec::Collar { .. });
        Ok(grid)
    }

    fn build_omega(&self, spec: &OmegaSpec<T>) -> Result<Vec<bool>, GridError> {
        let nc = self.num_cells();
        match spec {
            OmegaSpec::Empty => Ok(vec![false; nc]),
            OmegaSpec::Collar { width } => {
                self.check_width(*width, true)?;
                Ok((0..nc)
                    .map(|c| self.boundary_distance(self.cell_center(c)) < *width)
                    .collect())
            }
            OmegaSpec::Edges { edges, width } => {
                self.check_width(*width, false)?;
                Ok((0..nc)
                    .map(|c| {
                        let x = self.cell_center(c);
                        edges.iter().any(|e| self.edge_distance(x, *e) < *width)
                    })
                    .collect())
            }
            OmegaSpec::Cells(mask) => {
                if mask.len() != nc {
                    return Err(GridError::MaskLength {
                        got: mask.len(),
                        expect: nc,
                    });
                }
                Ok(mask.clone())
            }
        }
    }

    fn check_width(&self, width: T, collar: bool) -> Result<(), GridError> {
        if width < T::zero() {
            return Err(GridError::NegativeWidth { got: width.as_f64() });
        }
        let mut min_extent = self.extents[0];
        if self.dim == 2 {
            min_extent = min_extent.min(self.extents[1]);
        }
        if collar && width > min_extent * T::of(0.5) {
            return Err(GridError::CollarTooWide {
                width: width.as_f64(),
                extent: min_extent.as_f64(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> [T; 2] {
        self.extents
    }

    /// Cells per axis; `[n, 1]` in one dimension.
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    /// Node spacing per axis.
    pub fn spacing(&self) -> [T; 2] {
        self.spacing
    }

    /// Nodes per axis (cells + 1 along each active axis).
    pub fn nodes_per_axis(&self) -> [usize; 2] {
        match self.dim {
            1 => [self.cells[0] + 1, 1],
            _ => [self.cells[0] + 1, self.cells[1] + 1],
        }
    }

    pub fn num_nodes(&self) -> usize {
        let n = self.nodes_per_axis();
        n[0] * n[1]
    }

    pub fn num_cells(&self) -> usize {
        match self.dim {
            1 => self.cells[0],
            _ => self.cells[0] * self.cells[1],
        }
    }

    /// Volume of one cell (length in 1D, area in 2D).
    pub fn cell_volume(&self) -> T {
        match self.dim {
            1 => self.spacing[0],
            _ => self.spacing[0] * self.spacing[1],
        }
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes_per_axis()[0]
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + j * self.cells[0]
    }

    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        let nx = self.nodes_per_axis()[0];
        (node % nx, node / nx)
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.cells[0], cell / self.cells[0])
    }

    pub fn node_position(&self, node: usize) -> Vec2<T> {
        let (i, j) = self.node_coords(node);
        let fx = T::of(i as f64) / T::of(self.cells[0] as f64);
        let fy = match self.dim {
            1 => T::zero(),
            _ => T::of(j as f64) / T::of(self.cells[1] as f64),
        };
        Vec2::new(self.extents[0] * fx, self.extents[1] * fy)
    }

    pub fn cell_center(&self, cell: usize) -> Vec2<T> {
        let (i, j) = self.cell_coords(cell);
        let fx = (T::of(i as f64) + T::of(0.5)) / T::of(self.cells[0] as f64);
        let fy = match self.dim {
            1 => T::zero(),
            _ => (T::of(j as f64) + T::of(0.5)) / T::of(self.cells[1] as f64),
        };
        Vec2::new(self.extents[0] * fx, self.extents[1] * fy)
    }

    /// Cell containing a point, or None outside the closed domain. Points on
    /// the far faces belong to the last cell of that axis.
    pub fn cell_of_point(&self, x: Vec2<T>) -> Option<usize> {
        let locate = |coord: T, extent: T, n: usize| -> Option<usize> {
            if coord < T::zero() || coord > extent {
                return None;
            }
            let i = (coord / extent * T::of(n as f64)).floor().to_usize()?;
            Some(i.min(n - 1))
        };
        let i = locate(x.x, self.extents[0], self.cells[0])?;
        match self.dim {
            1 => Some(i),
            _ => {
                let j = locate(x.y, self.extents[1], self.cells[1])?;
                Some(self.cell_index(i, j))
            }
        }
    }

    pub fn point_in_domain(&self, x: Vec2<T>) -> bool {
        let in_x = x.x >= T::zero() && x.x <= self.extents[0];
        match self.dim {
            1 => in_x,
            _ => in_x && x.y >= T::zero() && x.y <= self.extents[1],
        }
    }

    /// Distance from a point to the domain boundary.
    pub fn boundary_distance(&self, x: Vec2<T>) -> T {
        let dx = x.x.min(self.extents[0] - x.x);
        match self.dim {
            1 => dx,
            _ => dx.min(x.y.min(self.extents[1] - x.y)),
        }
    }

    fn edge_distance(&self, x: Vec2<T>, edge: Edge) -> T {
        match edge {
            Edge::Left => x.x,
            Edge::Right => self.extents[0] - x.x,
            Edge::Bottom => x.y,
            Edge::Top => self.extents[1] - x.y,
        }
    }

    fn node_on_boundary(&self, node: usize) -> bool {
        let (i, j) = self.node_coords(node);
        let n = self.nodes_per_axis();
        match self.dim {
            1 => i == 0 || i == n[0] - 1,
            _ => i == 0 || i == n[0] - 1 || j == 0 || j == n[1] - 1,
        }
    }

    /// Per-node Dirichlet flags (outermost node layer).
    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.boundary_mask[node]
    }

    /// Per-cell damping-support flags.
    pub fn omega_mask(&self) -> &[bool] {
        &self.omega_mask
    }

    pub fn omega_cell_count(&self) -> usize {
        self.omega_mask.iter().filter(|&&m| m).count()
    }

    /// True when omega was built as a collar along the entire boundary.
    pub fn omega_is_full_collar(&self) -> bool {
        self.omega_is_full_collar
    }

    /// Quadrature weight of the dual cell around a node: full cell volume in
    /// the interior, halved per axis on the boundary.
    pub fn node_weight(&self, node: usize) -> T {
        let (i, j) = self.node_coords(node);
        let n = self.nodes_per_axis();
        let half = T::of(0.5);
        let mut w = self.cell_volume();
        if i == 0 || i == n[0] - 1 {
            w = w * half;
        }
        if self.dim == 2 && (j == 0 || j == n[1] - 1) {
            w = w * half;
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collar_of_one_spacing_marks_outermost_cells_in_1d() {
        let g = Grid::line(1.0, 10, OmegaSpec::collar(0.1)).unwrap();
        let mask = g.omega_mask();
        let expect: Vec<bool> = (0..10).map(|i| i == 0 || i == 9).collect();
        assert_eq!(mask, &expect[..]);
    }

    #[test]
    fn collar_cell_count_on_square() {
        // 16x16 cells, collar 0.25: four cell layers on each side remain,
        // leaving an 8x8 undamped core.
        let g = Grid::rectangle([1.0, 1.0], [16, 16], OmegaSpec::collar(0.25)).unwrap();
        assert_eq!(g.omega_cell_count(), 16 * 16 - 8 * 8);
        assert_eq!(g.omega_cell_count(), 192);
    }

    #[test]
    fn zero_collar_means_no_damping_cells() {
        let g = Grid::line(1.0, 10, OmegaSpec::collar(0.0)).unwrap();
        assert_eq!(g.omega_cell_count(), 0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Grid::line(0.0, 10, OmegaSpec::<f64>::Empty),
            Err(GridError::NonPositiveExtent { axis: 0, .. })
        ));
        assert!(matches!(
            Grid::line(1.0, 0, OmegaSpec::<f64>::Empty),
            Err(GridError::ZeroCells { axis: 0 })
        ));
        assert!(matches!(
            Grid::line(1.0, 10, OmegaSpec::collar(-0.5)),
            Err(GridError::NegativeWidth { .. })
        ));
        assert!(matches!(
            Grid::line(1.0, 10, OmegaSpec::collar(0.6)),
            Err(GridError::CollarTooWide { .. })
        ));
        assert!(matches!(
            Grid::rectangle([1.0, 1.0], [4, 4], OmegaSpec::Cells(vec![true; 3])),
            Err(GridError::MaskLength { got: 3, expect: 16 })
        ));
    }

    #[test]
    fn boundary_mask_is_the_outermost_node_layer() {
        let g = Grid::rectangle([1.0, 1.0], [4, 4], OmegaSpec::<f64>::Empty).unwrap();
        let interior: usize = (0..g.num_nodes()).filter(|&n| !g.is_dirichlet(n)).count();
        assert_eq!(g.num_nodes(), 25);
        assert_eq!(interior, 9);
    }

    #[test]
    fn one_sided_mask_touches_only_that_edge() {
        let g = Grid::rectangle(
            [1.0, 1.0],
            [10, 10],
            OmegaSpec::Edges {
                edges: vec![Edge::Bottom],
                width: 0.1,
            },
        )
        .unwrap();
        assert_eq!(g.omega_cell_count(), 10);
        assert!(!g.omega_is_full_collar());
        for c in 0..g.num_cells() {
            let (_, j) = g.cell_coords(c);
            assert_eq!(g.omega_mask()[c], j == 0);
        }
    }

    #[test]
    fn node_weights_sum_to_domain_volume() {
        let g = Grid::rectangle([2.0, 1.0], [8, 4], OmegaSpec::<f64>::Empty).unwrap();
        let total: f64 = (0..g.num_nodes()).map(|n| g.node_weight(n)).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn points_on_the_far_boundary_belong_to_the_last_cell() {
        let g = Grid::line(1.0, 10, OmegaSpec::<f64>::Empty).unwrap();
        assert_eq!(g.cell_of_point(Vec2::new(1.0, 0.0)), Some(9));
        assert_eq!(g.cell_of_point(Vec2::new(1.0 + 1e-12, 0.0)), None);
        assert_eq!(g.cell_of_point(Vec2::new(0.0, 0.0)), Some(0));
    }
}
