//! Pointwise checks of computed solutions and coefficients.

use num_complex::Complex64;

use crate::coefficients::CoefficientSet;
use crate::error::Result;
use crate::leech::LeechData;
use crate::matrix::{self, CMatrix};
use crate::realization::{self, Realization};

/// `count` points `r e^{iθ}` with radii in `[0.1, 0.9]` and a fixed angular
/// progression, for interior checks that need no RNG.
pub fn interior_points(count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|j| {
            let t = (j as f64 + 0.5) / count as f64;
            let r = 0.1 + 0.8 * t;
            Complex64::from_polar(r, 2.399_963_229_728_653 * j as f64)
        })
        .collect()
}

fn max_over<F>(points: &[Complex64], mut f: F) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<f64>,
{
    points.iter().try_fold(0.0_f64, |acc, &z| Ok(acc.max(f(z)?)))
}

/// `max ||G(z) X(z) - K(z)||` over `points`.
pub fn solution_residual(data: &LeechData, x: &Realization, points: &[Complex64]) -> Result<f64> {
    let (g, k) = (data.g(), data.k());
    max_over(points, |z| Ok(matrix::norm2(&(g.evaluate(z)? * x.evaluate(z)? - k.evaluate(z)?))))
}

/// `max_j max ||G Υ1j - K Υ2j||` over `points`.
pub fn kernel_residual(data: &LeechData, coeffs: &CoefficientSet, points: &[Complex64]) -> Result<f64> {
    let (g, k) = (data.g(), data.k());
    max_over(points, |z| {
        let u = coeffs.evaluate(z)?;
        let r = g.evaluate(z)? * u.rows(0, coeffs.p) - k.evaluate(z)? * u.rows(coeffs.p, coeffs.q);
        Ok(matrix::norm2(&r))
    })
}

/// `max ||Υ^* J1 Υ - J2||` over `points`, which should lie on the unit circle.
pub fn j_inner_defect(coeffs: &CoefficientSet, points: &[Complex64]) -> Result<f64> {
    max_over(points, |z| Ok(matrix::norm2(&coeffs.j_defect_at(z)?)))
}

/// Residual and norm tolerance a solution must meet before it is emitted.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-7;

/// Summary attached to every emitted solution.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub circle_points: usize,
    pub residual: f64,
    pub norm_estimate: f64,
    pub norm_resolution: f64,
    pub j_inner_defect: f64,
    pub kernel_residual: f64,
}

impl SolutionReport {
    /// Whether the solution meets the residual and norm tolerance `tol`.
    pub fn verified(&self, tol: f64) -> bool {
        self.residual <= tol && self.norm_estimate <= 1.0 + tol
    }
}

pub fn report(data: &LeechData, coeffs: &CoefficientSet, x: &Realization, grid: usize) -> Result<SolutionReport> {
    let circle = realization::circle_points(grid.max(1));
    let est = realization::hinf_norm_estimate(x, grid);
    let check_points = realization::circle_points(64);
    Ok(SolutionReport {
        circle_points: circle.len(),
        residual: solution_residual(data, x, &circle)?,
        norm_estimate: est.value,
        norm_resolution: est.resolution,
        j_inner_defect: j_inner_defect(coeffs, &check_points)?,
        kernel_residual: kernel_residual(data, coeffs, &check_points)?,
    })
}

/// Largest pointwise distance between two matrix functions over `points`.
pub fn sup_difference<F, H>(points: &[Complex64], mut f: F, mut h: H) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<CMatrix>,
    H: FnMut(Complex64) -> Result<CMatrix>,
{
    max_over(points, |z| Ok(matrix::norm2(&(f(z)? - h(z)?))))
}
