//! Dense complex matrix primitives.
//!
//! Everything downstream works over `Complex64`; real data is just the
//! special case of zero imaginary parts. The Hermitian eigendecomposition is
//! the one heavy primitive and backs the positivity tests, rank factors,
//! square roots and spectral norms.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from real row-major entries.
pub fn real(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c64(x, 0.0)))
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    let n = d.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c64(d[i], 0.0) } else { c64(0.0, 0.0) })
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

fn require_square(m: &CMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = require_square(m, "Hermitian eigenproblem input")?;
    if n == 0 {
        return Ok((Vec::new(), zeros(0, 0)));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let n = require_square(m, "Hermitian eigenproblem input")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() { m * m.adjoint() } else { m.adjoint() * m };
    let top = hermitian_eigenvalues(&gram)
        .ok()
        .and_then(|v| v.last().copied())
        .unwrap_or(0.0);
    top.max(0.0).sqrt()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// True iff `m` is Hermitian within `tol * ||m||` and its Hermitian part has
/// smallest eigenvalue above `tol`.
pub fn hermitian_posdef_check(m: &CMatrix, tol: f64) -> Result<bool> {
    let n = require_square(m, "positive-definiteness test input")?;
    if n == 0 {
        return Ok(true);
    }
    let skew = (m - m.adjoint()).norm();
    if skew > tol * m.norm() {
        return Ok(false);
    }
    let ev = hermitian_eigenvalues(m)?;
    Ok(ev[0] > tol)
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(m)?.first().copied().unwrap_or(f64::INFINITY))
}

/// Left minimal rank factor: `F` with `F F^* = M`, one column `sqrt(l) v` per
/// eigenpair with `l > rank_tol * ||M||`, ordered by decreasing eigenvalue.
pub fn minimal_rank_factor(m: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    minimal_rank_factor_with_floor(m, rank_tol, 0.0)
}

/// As [`minimal_rank_factor`], measuring the cutoff against `max(||M||, floor)`
/// so that a numerically zero `M` yields an empty factor.
pub fn minimal_rank_factor_with_floor(m: &CMatrix, rank_tol: f64, floor: f64) -> Result<CMatrix> {
    let n = require_square(m, "rank factor input")?;
    let (values, vectors) = hermitian_eigen(m)?;
    let scale = values.iter().fold(floor, |acc, v| acc.max(v.abs()));
    if let Some(&lo) = values.first() {
        if lo < -rank_tol * scale {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
    }
    let kept: Vec<usize> = (0..values.len()).rev().filter(|&k| values[k] > rank_tol * scale).collect();
    let mut f = zeros(n, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let s = values[k].sqrt();
        for i in 0..n {
            f[(i, col)] = vectors[(i, k)] * s;
        }
    }
    Ok(f)
}

/// Positive definite square root; errors unless the smallest eigenvalue exceeds `tol`.
pub fn pd_sqrt(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let n = require_square(m, "square root input")?;
    let (values, vectors) = hermitian_eigen(m)?;
    if let Some(&lo) = values.first() {
        if lo <= tol {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {lo:e} of square-root argument"
            )));
        }
    }
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = c64(v.sqrt(), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(hermitian_part(&(scaled * vectors.adjoint())))
}

/// Solves `M X = B` for Hermitian positive definite `M` by Cholesky.
pub fn hermitian_solve(m: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = require_square(m, "Hermitian system matrix")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, system has {n}",
            b.nrows()
        )));
    }
    if n == 0 {
        return Ok(zeros(0, b.ncols()));
    }
    let chol = hermitian_part(m)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive definite matrix, re-symmetrized.
pub fn hermitian_inverse(m: &CMatrix) -> Result<CMatrix> {
    let inv = hermitian_solve(m, &eye(m.nrows()))?;
    Ok(hermitian_part(&inv))
}

/// General square solve `M X = B` by partial-pivot LU.
pub fn solve(m: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = require_square(m, "system matrix")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, system has {n}",
            b.nrows()
        )));
    }
    if n == 0 {
        return Ok(zeros(0, b.ncols()));
    }
    let x = m
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{n}x{n} system")))?;
    if !is_finite(&x) {
        return Err(Error::Singular(format!("{n}x{n} system produced non-finite solution")));
    }
    Ok(x)
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    solve(m, &eye(m.nrows()))
}

/// Solves `X - A X A^* = W` by Smith doubling. Returns `None` if the powers of
/// `A` fail to die out within 64 squarings, i.e. `A` is not (robustly) stable.
pub(crate) fn smith_stein(a: &CMatrix, w: &CMatrix) -> Option<CMatrix> {
    let mut x = w.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        if ak.norm() < 1e-9 {
            let tail = &ak * &x * ak.adjoint();
            return Some(x + tail);
        }
        let step = &ak * &x * ak.adjoint();
        x += step;
        ak = &ak * &ak;
        let na = ak.norm();
        if !na.is_finite() || na > 1e150 || !is_finite(&x) {
            return None;
        }
    }
    None
}

/// Spectral radius estimate from normalized repeated squaring,
/// `||A^(2^k)||^(1/2^k)` with `k = 40`.
pub fn spectral_radius_estimate(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let n0 = a.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    let mut log_scale = n0.ln();
    let mut b = a / c64(n0, 0.0);
    let mut power = 1.0_f64;
    for _ in 0..40 {
        let sq = &b * &b;
        let ns = sq.norm();
        if ns == 0.0 || ns < 1e-300 {
            return 0.0;
        }
        b = sq / c64(ns, 0.0);
        log_scale = 2.0 * log_scale + ns.ln();
        power *= 2.0;
    }
    (log_scale / power).exp()
}

/// True iff the spectral radius of `a` is below `1 - tol`.
///
/// Decided by the Stein criterion: the scaled matrix `a / (1 - tol)` is stable
/// iff `X - A X A^* = I` has a positive definite solution.
pub fn is_schur_stable(a: &CMatrix, tol: f64) -> Result<bool> {
    let n = require_square(a, "state matrix")?;
    if n == 0 {
        return Ok(true);
    }
    let scale = 1.0 - tol;
    if scale <= 0.0 {
        return Ok(false);
    }
    let scaled = a / c64(scale, 0.0);
    match smith_stein(&scaled, &eye(n)) {
        Some(x) => hermitian_posdef_check(&x, 0.5),
        None => {
            log::debug!(
                "Stein iteration diverged; spectral radius estimate {:.12}",
                spectral_radius_estimate(a)
            );
            Ok(false)
        }
    }
}

/// Block diagonal `diag(a, b)`.
pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// `[a b]`.
pub fn hstack(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "horizontal concatenation of {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    Ok(out)
}

/// `[a; b]`.
pub fn vstack(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "vertical concatenation of {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    Ok(out)
}

#[cfg(test)]
pub(crate) mod testing {
    pub use crate::generate::{random_matrix as random, random_unitary};
}
