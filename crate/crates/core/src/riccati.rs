//! Stein equations and stabilizing solutions of the Popov-type Riccati equation
//!
//! ```text
//! Q = A^* Q A + (C - Γ^* Q A)^* (R0 - Γ^* Q Γ)^{-1} (C - Γ^* Q A)
//! ```
//!
//! A solution is stabilizing when `Δ = R0 - Γ^* Q Γ` is positive definite and
//! `A0 = A - Γ Δ^{-1} (C - Γ^* Q A)` is Schur stable; there is at most one.

use crate::error::{Error, Result};
use crate::matrix::{self, c64, hermitian_part, CMatrix};

/// Solves `P - A P A^* = W` for stable `A`.
pub fn solve_stein(a: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n || w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Stein equation with A {:?} and W {:?}",
            a.shape(),
            w.shape()
        )));
    }
    if n == 0 {
        return Ok(matrix::zeros(0, 0));
    }
    let unstable = || Error::Unstable("Stein equation coefficient".into());
    let mut p = matrix::smith_stein(a, w).ok_or_else(unstable)?;
    // one step of residual correction
    let r = w - (&p - a * &p * a.adjoint());
    if r.norm() > 0.0 {
        p += matrix::smith_stein(a, &r).ok_or_else(unstable)?;
    }
    Ok(p)
}

/// Residual of [`solve_stein`]: `||P - A P A^* - W||`.
pub fn stein_residual(a: &CMatrix, w: &CMatrix, p: &CMatrix) -> f64 {
    (p - a * p * a.adjoint() - w).norm()
}

#[derive(Debug, Clone)]
pub struct RiccatiOptions {
    pub max_iter: usize,
    /// Threshold for the positive-definiteness and stability tests.
    pub tol: f64,
    /// Relative step size at which the iteration is considered converged.
    pub step_tol: f64,
    /// Residual bound, relative to `1 + ||Q||`, required at exit.
    pub residual_tol: f64,
    /// Smallest-to-largest singular value ratio of the observability matrix.
    pub observability_tol: f64,
    /// Switch to Newton steps once the closed loop becomes stable.
    pub newton: bool,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions {
            max_iter: 10_000,
            tol: matrix::DEFAULT_TOL,
            step_tol: 1e-12,
            residual_tol: 1e-9,
            observability_tol: 1e-10,
            newton: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub q: CMatrix,
    /// `Δ = R0 - Γ^* Q Γ`
    pub delta: CMatrix,
    /// Closed-loop matrix `A0 = A - Γ C0`.
    pub a0: CMatrix,
    /// Output gain `C0 = Δ^{-1}(C - Γ^* Q A)`.
    pub c0: CMatrix,
    pub iterations: usize,
    pub residual: f64,
}

/// Stacked observability matrix `[C; CA; ...; CA^{n-1}]`.
pub fn observability_matrix(c: &CMatrix, a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let m = c.nrows();
    let mut out = matrix::zeros(n * m, n);
    let mut block = c.clone();
    for k in 0..n {
        out.view_mut((k * m, 0), (m, n)).copy_from(&block);
        block = &block * a;
    }
    out
}

/// Ratio of the smallest to the largest singular value of the observability
/// matrix, or 0 when it has fewer rows than columns.
pub fn observability_ratio(c: &CMatrix, a: &CMatrix) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let obs = observability_matrix(c, a);
    let s = matrix::singular_values(&obs);
    if s.len() < n || s[0] == 0.0 {
        return 0.0;
    }
    s[n - 1] / s[0]
}

struct Popov<'a> {
    a: &'a CMatrix,
    gamma: &'a CMatrix,
    r0: &'a CMatrix,
    c: &'a CMatrix,
}

struct Linearization {
    delta: CMatrix,
    gain: CMatrix,
    a0: CMatrix,
    /// `C - Γ^* Q A`
    coupling: CMatrix,
}

impl Popov<'_> {
    fn linearize(&self, q: &CMatrix, tol: f64) -> Result<Linearization> {
        let gq = self.gamma.adjoint() * q;
        let delta = hermitian_part(&(self.r0 - &gq * self.gamma));
        if !matrix::hermitian_posdef_check(&delta, tol)? {
            return Err(Error::NotPositiveDefinite("R0 - Γ^*QΓ".into()));
        }
        let coupling = self.c - &gq * self.a;
        let gain = matrix::hermitian_solve(&delta, &coupling)?;
        let a0 = self.a - self.gamma * &gain;
        Ok(Linearization { delta, gain, a0, coupling })
    }

    fn fixed_point(&self, q: &CMatrix, lin: &Linearization) -> CMatrix {
        hermitian_part(&(self.a.adjoint() * q * self.a + lin.coupling.adjoint() * &lin.gain))
    }

    fn newton(&self, lin: &Linearization) -> Result<CMatrix> {
        let l = &lin.gain;
        let ctl = self.c.adjoint() * l;
        let rhs = hermitian_part(&(&ctl + ctl.adjoint() - l.adjoint() * self.r0 * l));
        Ok(hermitian_part(&solve_stein(&lin.a0.adjoint(), &rhs)?))
    }

    fn residual(&self, q: &CMatrix, lin: &Linearization) -> f64 {
        (self.fixed_point(q, lin) - q).norm()
    }
}

/// Computes the unique stabilizing solution, iterating from `Q = 0`.
pub fn stabilizing_riccati(
    a: &CMatrix,
    gamma: &CMatrix,
    r0: &CMatrix,
    c: &CMatrix,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution> {
    let seed = matrix::zeros(a.nrows(), a.nrows());
    stabilizing_riccati_from(a, gamma, r0, c, &seed, opts)
}

/// As [`stabilizing_riccati`], starting the iteration from `seed`.
pub fn stabilizing_riccati_from(
    a: &CMatrix,
    gamma: &CMatrix,
    r0: &CMatrix,
    c: &CMatrix,
    seed: &CMatrix,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let m = r0.nrows();
    if a.ncols() != n
        || gamma.shape() != (n, m)
        || r0.ncols() != m
        || c.shape() != (m, n)
        || seed.shape() != (n, n)
    {
        return Err(Error::Dimension(format!(
            "Riccati data A {:?}, Γ {:?}, R0 {:?}, C {:?}, seed {:?}",
            a.shape(),
            gamma.shape(),
            r0.shape(),
            c.shape(),
            seed.shape()
        )));
    }
    if !matrix::is_schur_stable(a, opts.tol)? {
        return Err(Error::Unstable("Riccati state matrix A".into()));
    }
    let ratio = observability_ratio(c, a);
    if ratio <= opts.observability_tol {
        return Err(Error::NotObservable { ratio });
    }

    let popov = Popov { a, gamma, r0, c };
    let breakdown = |iterations: usize, reason: String| Error::NoStabilizingSolution { reason, iterations };

    let mut q = hermitian_part(seed);
    let mut last_residual = f64::INFINITY;
    let mut rising = 0usize;
    let mut newton_ok = opts.newton;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let lin = popov
            .linearize(&q, opts.tol)
            .map_err(|e| breakdown(iterations, format!("Δ lost positive definiteness ({e})")))?;
        let residual = popov.residual(&q, &lin);
        if iterations > 3 && residual > last_residual {
            rising += 1;
            log::debug!("Riccati residual rose at iteration {iterations}: {residual:e}");
        }
        last_residual = residual;

        let use_newton = newton_ok && matrix::is_schur_stable(&lin.a0, opts.tol)?;
        let next = if use_newton {
            match popov.newton(&lin) {
                Ok(qn) if popov.linearize(&qn, opts.tol).is_ok() => qn,
                _ => {
                    log::debug!("Newton step rejected at iteration {iterations}; continuing with fixed point");
                    newton_ok = false;
                    popov.fixed_point(&q, &lin)
                }
            }
        } else {
            popov.fixed_point(&q, &lin)
        };
        if !matrix::is_finite(&next) {
            return Err(breakdown(iterations, "iterate became non-finite".into()));
        }
        let step = (&next - &q).norm();
        q = next;
        log::trace!("Riccati iteration {iterations}: residual {residual:e}, step {step:e}");
        if step <= opts.step_tol * (1.0 + q.norm()) {
            converged = true;
            break;
        }
    }
    if rising > 0 {
        log::debug!("Riccati residual was non-monotone {rising} times");
    }

    let lin = popov
        .linearize(&q, opts.tol)
        .map_err(|e| breakdown(iterations, format!("Δ not positive definite at exit ({e})")))?;
    let residual = popov.residual(&q, &lin);
    if !converged && residual > opts.residual_tol * (1.0 + q.norm()) {
        return Err(breakdown(iterations, format!("no convergence, residual {residual:e}")));
    }
    if residual > opts.residual_tol * (1.0 + q.norm()) {
        return Err(breakdown(iterations, format!("residual {residual:e} above tolerance")));
    }
    if !matrix::is_schur_stable(&lin.a0, opts.tol)? {
        return Err(breakdown(iterations, "closed loop A0 is not stable".into()));
    }
    if n > 0 {
        let s = matrix::singular_values(&q);
        if s[n - 1] <= 1e-14 * s[0] {
            return Err(Error::Breakdown(format!(
                "stabilizing solution is numerically singular (σmin/σmax = {:e})",
                s[n - 1] / s[0]
            )));
        }
        log::debug!("Riccati solution condition number {:e}", s[0] / s[n - 1]);
    }
    Ok(RiccatiSolution {
        q,
        delta: lin.delta,
        a0: lin.a0,
        c0: lin.gain,
        iterations,
        residual,
    })
}

/// Scaled copy helper used by tests and the generator.
pub(crate) fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m * c64(s, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::testing::random;
    use crate::matrix::{eye, real, zeros};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stein_examples() {
        let p = solve_stein(&zeros(2, 2), &eye(2)).unwrap();
        assert!((p - eye(2)).norm() < 1e-15);
        let p = solve_stein(&real(1, 1, &[0.5]), &real(1, 1, &[1.0])).unwrap();
        assert!((p[(0, 0)].re - 4.0 / 3.0).abs() < 1e-14);
        assert!(matches!(
            solve_stein(&real(1, 1, &[1.2]), &real(1, 1, &[1.0])),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn stein_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut a = random(&mut rng, 4, 4);
            let rho = matrix::spectral_radius_estimate(&a);
            a = scaled(&a, 0.95 / rho);
            let b = random(&mut rng, 4, 2);
            let w = &b * b.adjoint();
            let p = solve_stein(&a, &w).unwrap();
            assert!(stein_residual(&a, &w, &p) <= 1e-11 * (1.0 + w.norm()));
            assert!(matrix::min_eigenvalue(&p).unwrap() > -1e-12);
        }
    }

    #[test]
    fn riccati_decoupled() {
        // A = 0, Γ = 0: Q = C^* R0^{-1} C, Δ = R0, A0 = 0
        let a = zeros(2, 2);
        let gamma = zeros(2, 2);
        let r0 = real(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = real(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let sol = stabilizing_riccati(&a, &gamma, &r0, &c, &RiccatiOptions::default()).unwrap();
        let expected = c.adjoint() * matrix::inverse(&r0).unwrap() * &c;
        assert!((&sol.q - expected).norm() < 1e-12);
        assert!((&sol.delta - &r0).norm() < 1e-12);
        assert!(sol.a0.norm() < 1e-12);
    }

    #[test]
    fn riccati_scalar_picks_stabilizing_root() {
        // q^2 - 2.5 q + 1 = 0 has roots 0.5 and 2; only q = 0.5 gives |A0| < 1
        let sol = stabilizing_riccati(
            &real(1, 1, &[0.0]),
            &real(1, 1, &[1.0]),
            &real(1, 1, &[2.5]),
            &real(1, 1, &[1.0]),
            &RiccatiOptions::default(),
        )
        .unwrap();
        assert!((sol.q[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((sol.delta[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((sol.a0[(0, 0)].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn riccati_rejects_unobservable_pair() {
        let a = real(2, 2, &[0.5, 0.0, 0.0, 0.3]);
        let c = real(1, 2, &[1.0, 0.0]);
        let err = stabilizing_riccati(&a, &zeros(2, 1), &real(1, 1, &[1.0]), &c, &RiccatiOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::NotObservable { .. }));
    }

    #[test]
    fn riccati_reports_indefinite_popov_data() {
        let err = stabilizing_riccati(
            &real(1, 1, &[0.5]),
            &real(1, 1, &[0.0]),
            &real(1, 1, &[-1.0]),
            &real(1, 1, &[1.0]),
            &RiccatiOptions::default(),
        )
        .unwrap_err();
        assert!(err.is_infeasible(), "{err}");
    }

    #[test]
    fn fixed_point_only_agrees_with_newton() {
        let a = real(1, 1, &[0.6]);
        let gamma = real(1, 1, &[0.3]);
        let r0 = real(1, 1, &[2.0]);
        let c = real(1, 1, &[1.0]);
        let newton = stabilizing_riccati(&a, &gamma, &r0, &c, &RiccatiOptions::default()).unwrap();
        let plain = stabilizing_riccati(
            &a,
            &gamma,
            &r0,
            &c,
            &RiccatiOptions { newton: false, ..Default::default() },
        )
        .unwrap();
        assert!((&newton.q - &plain.q).norm() < 1e-10);
        assert!(newton.iterations < plain.iterations);
    }
}
