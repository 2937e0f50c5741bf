//! Compressed-row symmetric sparse matrices and a Jacobi-preconditioned
//! conjugate gradient solver.
//!
//! Assembly goes through triplets which are sorted and merged in a fixed
//! order, so repeated assembly of the same operator is bit-identical.
//! Symmetric matrices are assembled from their upper triangle and mirrored,
//! making entry(i,j) == entry(j,i) exact.

use crate::scalar::Real;
use std::io::Write;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Build from arbitrary triplets; duplicate positions are summed.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, T)>) -> Self {
        trips.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_counts = vec![0usize; n];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<T> = Vec::with_capacity(trips.len());
        let mut last = None;
        for (i, j, v) in trips {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Build a symmetric matrix from upper-triangle triplets (i <= j). Each
    /// off-diagonal entry is mirrored with the identical value.
    pub fn from_upper_triplets(n: usize, upper: Vec<(usize, usize, T)>) -> Self {
        let mut full = Vec::with_capacity(upper.len() * 2);
        for (i, j, v) in upper {
            debug_assert!(i <= j);
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_triplets(n, full)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_else(T::zero)
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    /// x . (A x), using a caller-provided scratch vector.
    pub fn quad_with(&self, x: &[T], scratch: &mut Vec<T>) -> T {
        scratch.clear();
        scratch.resize(self.n, T::zero());
        self.matvec(x, scratch);
        x.iter().zip(scratch.iter()).map(|(&a, &b)| a * b).sum()
    }

    pub fn quad(&self, x: &[T]) -> T {
        let mut s = Vec::new();
        self.quad_with(x, &mut s)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.entry(i, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if self.entry(j, i) != v {
                    return false;
                }
            }
        }
        true
    }

    /// Coordinate-format text dump: one `row col value` line per stored
    /// entry, preceded by a size header.
    pub fn dump_triplets(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i, j, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("matrix diagonal must be positive for Jacobi preconditioning; row {row} has {value}")]
    NonPositiveDiagonal { row: usize, value: f64 },
    #[error("conjugate gradient did not reach tolerance {tol} in {iterations} iterations (relative residual {rel_residual}, estimated condition number {condition_estimate:.3e})")]
    NotConverged {
        iterations: usize,
        tol: f64,
        rel_residual: f64,
        condition_estimate: f64,
    },
    #[error("conjugate gradient broke down at iteration {iteration}: direction curvature {curvature} is not positive (matrix not positive definite?)")]
    IndefiniteDirection { iteration: usize, curvature: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T> {
    /// Stop when ||b - Ax|| <= rel_tol * ||b||.
    pub rel_tol: T,
    /// Iteration cap; defaults to 10 * n.
    pub max_iters: Option<usize>,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            rel_tol: T::of(1e-10),
            max_iters: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub rel_residual: T,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// systems. Deterministic: no reordering, no parallel reductions.
pub fn pcg<T: Real>(
    a: &Csr<T>,
    b: &[T],
    x0: Option<&[T]>,
    opts: SolveOptions<T>,
) -> Result<Solution<T>, SolveError> {
    let n = a.n();
    debug_assert_eq!(b.len(), n);
    let max_iters = opts.max_iters.unwrap_or(10 * n);

    let b_norm = norm(b);
    if b_norm == T::zero() {
        return Ok(Solution {
            x: vec![T::zero(); n],
            iterations: 0,
            rel_residual: T::zero(),
        });
    }

    let mut inv_diag = Vec::with_capacity(n);
    for i in 0..n {
        let d = a.entry(i, i);
        if !(d > T::zero()) {
            return Err(SolveError::NonPositiveDiagonal {
                row: i,
                value: d.as_f64(),
            });
        }
        inv_diag.push(T::one() / d);
    }

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![T::zero(); n],
    };
    let mut r = vec![T::zero(); n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];

    // CG coefficients feed the Lanczos tridiagonal for conditioning
    // diagnostics on failure.
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut rel = norm(&r) / b_norm;
    let mut iterations = 0;
    while rel > opts.rel_tol && iterations < max_iters {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolveError::IndefiniteDirection {
                iteration: iterations,
                curvature: pap.as_f64(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
        alphas.push(alpha.as_f64());
        betas.push(beta.as_f64());
        iterations += 1;
        rel = norm(&r) / b_norm;
    }

    // Recurrence residuals can drift; confirm with the true residual and
    // keep iterating if it disagrees.
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    rel = norm(&r) / b_norm;
    if rel > opts.rel_tol {
        if iterations < max_iters {
            let remaining = SolveOptions {
                rel_tol: opts.rel_tol,
                max_iters: Some(max_iters - iterations),
            };
            let refined = pcg(a, b, Some(&x), remaining)?;
            return Ok(Solution {
                x: refined.x,
                iterations: iterations + refined.iterations,
                rel_residual: refined.rel_residual,
            });
        }
        return Err(SolveError::NotConverged {
            iterations,
            tol: opts.rel_tol.as_f64(),
            rel_residual: rel.as_f64(),
            condition_estimate: lanczos_condition(&alphas, &betas),
        });
    }

    Ok(Solution {
        x,
        iterations,
        rel_residual: rel,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Condition estimate of the preconditioned operator from the CG-Lanczos
/// tridiagonal (diagonal 1/a_j + b_{j-1}/a_{j-1}, off-diagonal sqrt(b_j)/a_j).
fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    if m == 0 {
        return f64::NAN;
    }
    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m {
        let mut d = 1.0 / alphas[j];
        if j > 0 {
            d += betas[j - 1] / alphas[j - 1];
        }
        diag.push(d);
        if j + 1 < m {
            off.push(betas[j].max(0.0).sqrt() / alphas[j]);
        }
    }
    // Gershgorin bracket, then bisection with the Sturm count.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..m {
        let mut r = 0.0;
        if j > 0 {
            r += off[j - 1].abs();
        }
        if j < m - 1 {
            r += off[j].abs();
        }
        lo = lo.min(diag[j] - r);
        hi = hi.max(diag[j] + r);
    }
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for j in 1..m {
            let denom = if d.abs() < 1e-300 { 1e-300 } else { d };
            d = (diag[j] - x) - off[j - 1] * off[j - 1] / denom;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bisect = |target: usize| -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if count_below(mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    let min_eig = bisect(0);
    let max_eig = bisect(m - 1);
    if min_eig <= 0.0 {
        f64::INFINITY
    } else {
        max_eig / min_eig
    }
}
