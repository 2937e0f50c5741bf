//! Dynamic state of the coupled system: the two displacement fields and
//! their velocities, as full-length nodal vectors. Dirichlet nodes stay
//! identically zero; every constructor and the integrator re-assert this.

use crate::grid::Grid;
use crate::linalg::Vec2;
use crate::scalar::Real;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    /// First displacement field.
    pub u: Vec<T>,
    /// Second displacement field.
    pub v: Vec<T>,
    /// Velocity of `u`.
    pub p: Vec<T>,
    /// Velocity of `v`.
    pub q: Vec<T>,
    /// Simulation time the state belongs to.
    pub t: T,
}

impl<T: Real> State<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        let n = grid.num_nodes();
        State {
            u: vec![T::zero(); n],
            v: vec![T::zero(); n],
            p: vec![T::zero(); n],
            q: vec![T::zero(); n],
            t: T::zero(),
        }
    }

    /// Sample four nodal profiles and zero the boundary layer.
    pub fn from_profiles(
        grid: &Grid<T>,
        u0: impl Fn(Vec2<T>) -> T,
        v0: impl Fn(Vec2<T>) -> T,
        p0: impl Fn(Vec2<T>) -> T,
        q0: impl Fn(Vec2<T>) -> T,
    ) -> Self {
        let mut s = Self::zeros(grid);
        for node in 0..grid.num_nodes() {
            let x = grid.node_position(node);
            s.u[node] = u0(x);
            s.v[node] = v0(x);
            s.p[node] = p0(x);
            s.q[node] = q0(x);
        }
        s.project_dirichlet(grid);
        s
    }

    /// Independent uniform values in [-amplitude, amplitude] on interior
    /// nodes of all four fields; boundary stays zero.
    pub fn random_interior(grid: &Grid<T>, amplitude: T, rng: &mut impl Rng) -> Self {
        let mut s = Self::zeros(grid);
        for field in [&mut s.u, &mut s.v, &mut s.p, &mut s.q] {
            for node in 0..grid.num_nodes() {
                if !grid.is_dirichlet(node) {
                    field[node] = amplitude * T::of(rng.random_range(-1.0..1.0));
                }
            }
        }
        s
    }

    /// Force exact zeros on Dirichlet nodes.
    pub fn project_dirichlet(&mut self, grid: &Grid<T>) {
        for node in 0..grid.num_nodes() {
            if grid.is_dirichlet(node) {
                self.u[node] = T::zero();
                self.v[node] = T::zero();
                self.p[node] = T::zero();
                self.q[node] = T::zero();
            }
        }
    }

    pub fn dirichlet_clean(&self, grid: &Grid<T>) -> bool {
        (0..grid.num_nodes()).all(|n| {
            !grid.is_dirichlet(n)
                || (self.u[n] == T::zero()
                    && self.v[n] == T::zero()
                    && self.p[n] == T::zero()
                    && self.q[n] == T::zero())
        })
    }

    /// Largest absolute value across all four fields.
    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for field in [&self.u, &self.v, &self.p, &self.q] {
            for &x in field.iter() {
                m = m.max(x.abs());
            }
        }
        m
    }

    /// Swap the roles of the two components: (u, p) <-> (v, q).
    pub fn swap_components(&mut self) {
        std::mem::swap(&mut self.u, &mut self.v);
        std::mem::swap(&mut self.p, &mut self.q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::OmegaSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn profiles_are_zeroed_on_the_boundary() {
        let g = Grid::line(1.0, 8, OmegaSpec::<f64>::Empty).unwrap();
        let s = State::from_profiles(&g, |_| 1.0, |_| 2.0, |_| 3.0, |_| 4.0);
        assert!(s.dirichlet_clean(&g));
        assert_eq!(s.u[0], 0.0);
        assert_eq!(s.u[4], 1.0);
        assert_eq!(s.q[8], 0.0);
    }

    #[test]
    fn random_states_are_reproducible_and_clean() {
        let g = Grid::rectangle([1.0, 1.0], [5, 5], OmegaSpec::<f64>::Empty).unwrap();
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let s1 = State::random_interior(&g, 1.0, &mut rng1);
        let s2 = State::random_interior(&g, 1.0, &mut rng2);
        assert_eq!(s1, s2);
        assert!(s1.dirichlet_clean(&g));
        assert!(s1.max_abs() > 0.0);
        assert!(s1.max_abs() <= 1.0);
    }
}
