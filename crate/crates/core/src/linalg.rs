//! Tiny fixed-size vector/matrix helpers for the 1- and 2-dimensional setting.

use crate::scalar::Real;

/// Point or direction in the plane. One-dimensional configurations use `x`
/// and keep `y = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 {
            x: T::zero(),
            y: T::zero(),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: T) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }
}

/// Symmetric 2x2 matrix stored as (xx, xy, yy). Doubles as a 1x1 matrix in
/// one-dimensional configurations, where only `xx` is meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> SymMat<T> {
    pub fn new(xx: T, xy: T, yy: T) -> Self {
        SymMat { xx, xy, yy }
    }

    pub fn identity() -> Self {
        SymMat {
            xx: T::one(),
            xy: T::zero(),
            yy: T::one(),
        }
    }

    pub fn diag(xx: T, yy: T) -> Self {
        SymMat {
            xx,
            xy: T::zero(),
            yy,
        }
    }

    pub fn scaled(self, s: T) -> Self {
        SymMat::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(self, o: Self) -> Self {
        SymMat::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(self, o: Self) -> Self {
        SymMat::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn mul_vec(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// v . (M v)
    pub fn quad(self, v: Vec2<T>) -> T {
        self.mul_vec(v).dot(v)
    }

    /// self * m * self; symmetric because self and m are.
    pub fn sandwich(self, m: Self) -> Self {
        let c00 = self.xx * m.xx + self.xy * m.xy;
        let c01 = self.xx * m.xy + self.xy * m.yy;
        let c10 = self.xy * m.xx + self.yy * m.xy;
        let c11 = self.xy * m.xy + self.yy * m.yy;
        SymMat::new(
            c00 * self.xx + c01 * self.xy,
            c00 * self.xy + c01 * self.yy,
            c10 * self.xy + c11 * self.yy,
        )
    }

    pub fn det(self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn inverse(self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() {
            return None;
        }
        Some(SymMat::new(self.yy / d, -self.xy / d, self.xx / d))
    }

    /// Eigenvalues, smaller first. Always real for symmetric input.
    pub fn eigenvalues(self) -> (T, T) {
        let half = T::of(0.5);
        let mean = (self.xx + self.yy) * half;
        let diff = (self.xx - self.yy) * half;
        let r = diff.hypot(self.xy);
        (mean - r, mean + r)
    }

    /// Positive definite test via leading minors.
    pub fn is_spd(self) -> bool {
        self.xx > T::zero() && self.det() > T::zero()
    }

    /// Smaller root of det(A - lambda B) = 0 with B symmetric positive
    /// definite: the minimum of v.Av over v.Bv = 1.
    pub fn min_gen_eigenvalue(self, b: Self) -> T {
        // (b.det) l^2 - (axx*byy + ayy*bxx - 2 axy*bxy) l + a.det = 0
        let two = T::of(2.0);
        let ca = b.det();
        let cb = self.xx * b.yy + self.yy * b.xx - two * self.xy * b.xy;
        let cc = self.det();
        let disc = (cb * cb - T::of(4.0) * ca * cc).max(T::zero()).sqrt();
        ((cb - disc) / (two * ca)).min((cb + disc) / (two * ca))
    }
}
