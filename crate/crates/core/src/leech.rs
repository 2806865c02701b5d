//! Problem data `[G K] = [D1 D2] + z C (I - zA)^{-1} [B1 B2]` and the
//! finite-dimensional matrices that solve it.

use crate::error::{Error, Result};
use crate::matrix::{self, eye, hermitian_part, CMatrix};
use crate::realization::Realization;
use crate::riccati::{self, RiccatiOptions, RiccatiSolution};

/// Joint realization of `G` (m x p) and `K` (m x q) over one state space.
#[derive(Debug, Clone, PartialEq)]
pub struct LeechData {
    pub a: CMatrix,
    pub b1: CMatrix,
    pub b2: CMatrix,
    pub c: CMatrix,
    pub d1: CMatrix,
    pub d2: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
}

impl LeechData {
    /// Checks block shapes and finiteness; the analytic hypotheses are left to
    /// [`validate`].
    pub fn new(a: CMatrix, b1: CMatrix, b2: CMatrix, c: CMatrix, d1: CMatrix, d2: CMatrix) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        let (p, q) = (d1.ncols(), d2.ncols());
        let expected = [
            ("A", a.shape(), (n, n)),
            ("B1", b1.shape(), (n, p)),
            ("B2", b2.shape(), (n, q)),
            ("C", c.shape(), (m, n)),
            ("D1", d1.shape(), (m, p)),
            ("D2", d2.shape(), (m, q)),
        ];
        for (name, got, want) in expected {
            if got != want {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{} for (n, m, p, q) = ({n}, {m}, {p}, {q})",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        for (name, x) in [("A", &a), ("B1", &b1), ("B2", &b2), ("C", &c), ("D1", &d1), ("D2", &d2)] {
            if !matrix::is_finite(x) {
                return Err(Error::InvalidData(format!("{name} has non-finite entries")));
            }
        }
        Ok(LeechData { a, b1, b2, c, d1, d2 })
    }

    pub fn dims(&self) -> Dims {
        Dims { n: self.a.nrows(), m: self.c.nrows(), p: self.d1.ncols(), q: self.d2.ncols() }
    }

    pub fn g(&self) -> Realization {
        Realization::new(self.a.clone(), self.b1.clone(), self.c.clone(), self.d1.clone())
            .expect("shapes checked on construction")
    }

    pub fn k(&self) -> Realization {
        Realization::new(self.a.clone(), self.b2.clone(), self.c.clone(), self.d2.clone())
            .expect("shapes checked on construction")
    }

    /// Same `G`, with `K` multiplied by `s`.
    pub fn with_k_scaled(&self, s: f64) -> Self {
        LeechData {
            b2: riccati::scaled(&self.b2, s),
            d2: riccati::scaled(&self.d2, s),
            ..self.clone()
        }
    }
}

/// Threshold on `σmin / σmax` of `[B1; D1]` for the kernel condition.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub dims: Dims,
    pub stable: bool,
    pub spectral_radius: f64,
    pub observable: bool,
    pub observability_ratio: f64,
    /// `p >= m`.
    pub wide: bool,
    /// `[B1; D1]` is one-to-one.
    pub kernel_ok: bool,
    pub kernel_ratio: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.stable && self.observable && self.wide && self.kernel_ok
    }

    /// Converts the first failed check into an error.
    pub fn ensure(&self) -> Result<()> {
        if !self.wide {
            return Err(Error::Dimension(format!(
                "G must have at least as many columns as rows (m = {}, p = {})",
                self.dims.m, self.dims.p
            )));
        }
        if !self.stable {
            return Err(Error::Unstable(format!("A (spectral radius ≈ {:.6})", self.spectral_radius)));
        }
        if !self.observable {
            return Err(Error::NotObservable { ratio: self.observability_ratio });
        }
        if !self.kernel_ok {
            return Err(Error::InvalidData(format!(
                "[B1; D1] has a nontrivial kernel (σmin/σmax = {:e})",
                self.kernel_ratio
            )));
        }
        Ok(())
    }
}

pub fn validate(data: &LeechData, tol: f64) -> ValidationReport {
    let dims = data.dims();
    let stable = matrix::is_schur_stable(&data.a, tol).unwrap_or(false);
    let observability_ratio = riccati::observability_ratio(&data.c, &data.a);
    let stack = matrix::vstack(&data.b1, &data.d1).expect("shapes checked on construction");
    let kernel_ratio = if dims.p == 0 {
        1.0
    } else {
        let s = matrix::singular_values(&stack);
        if s.len() < dims.p || s[0] == 0.0 {
            0.0
        } else {
            s[dims.p - 1] / s[0]
        }
    };
    ValidationReport {
        dims,
        stable,
        spectral_radius: matrix::spectral_radius_estimate(&data.a),
        observable: observability_ratio > RiccatiOptions::default().observability_tol,
        observability_ratio,
        wide: dims.p >= dims.m,
        kernel_ok: kernel_ratio > KERNEL_TOL,
        kernel_ratio,
    }
}

/// Popov data of `GG^* - KK^*` and of `GG^*` alone.
#[derive(Debug, Clone)]
pub struct PopovData {
    pub r0: CMatrix,
    pub gamma: CMatrix,
    pub r10: CMatrix,
    pub gamma0: CMatrix,
}

pub fn popov_data(data: &LeechData, p1: &CMatrix, p2: &CMatrix) -> PopovData {
    let (c, a) = (&data.c, &data.a);
    let d1d1 = &data.d1 * data.d1.adjoint();
    let d2d2 = &data.d2 * data.d2.adjoint();
    let b1d1 = &data.b1 * data.d1.adjoint();
    let b2d2 = &data.b2 * data.d2.adjoint();
    let dp = p1 - p2;
    PopovData {
        r0: hermitian_part(&(&d1d1 - &d2d2 + c * &dp * c.adjoint())),
        gamma: &b1d1 - &b2d2 + a * &dp * c.adjoint(),
        r10: hermitian_part(&(&d1d1 + c * p1 * c.adjoint())),
        gamma0: &b1d1 + a * p1 * c.adjoint(),
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub riccati: RiccatiOptions,
    /// Threshold for positive-definiteness and stability tests.
    pub tol: f64,
    /// Relative eigenvalue cutoff for the minimal rank factor of the Gram defect.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { riccati: RiccatiOptions::default(), tol: matrix::DEFAULT_TOL, rank_tol: matrix::DEFAULT_RANK_TOL }
    }
}

/// Every matrix entering the coefficient realizations.
#[derive(Debug, Clone)]
pub struct DerivedMatrices {
    pub dims: Dims,
    pub p1: CMatrix,
    pub p2: CMatrix,
    pub popov: PopovData,
    /// Stabilizing solution for `(R0, Γ)`.
    pub riccati: RiccatiSolution,
    /// Stabilizing solution for `(R10, Γ0)`, i.e. for `K = 0`.
    pub riccati0: RiccatiSolution,
    pub q_inv: CMatrix,
    /// `Q^{-1} + P2 - P1`, positive definite exactly when the problem is suboptimal.
    pub z: CMatrix,
    pub z_inv: CMatrix,
    /// `(Q0^{-1} - P1)^{-1}`
    pub z0_inv: CMatrix,
    /// Smallest eigenvalue of `z`.
    pub feasibility_margin: f64,
    pub omega: CMatrix,
    pub c1: CMatrix,
    pub c2: CMatrix,
    pub b0: CMatrix,
    /// `I_p - E_p^* T_G^* (T_G T_G^*)^{-1} T_G E_p`
    pub gram_defect: CMatrix,
    pub theta0: CMatrix,
    pub delta0_sq: CMatrix,
    pub delta1_sq: CMatrix,
    pub delta0: CMatrix,
    pub delta1: CMatrix,
}

impl DerivedMatrices {
    pub fn q(&self) -> &CMatrix {
        &self.riccati.q
    }

    pub fn q0(&self) -> &CMatrix {
        &self.riccati0.q
    }

    pub fn a0(&self) -> &CMatrix {
        &self.riccati.a0
    }

    pub fn c0(&self) -> &CMatrix {
        &self.riccati.c0
    }

    /// `Δ = R0 - Γ^* Q Γ`
    pub fn delta(&self) -> &CMatrix {
        &self.riccati.delta
    }
}

/// Gram defect `M = I_p - E_p^* T_G^* (T_G T_G^*)^{-1} T_G E_p` in state-space form.
pub fn gram_defect(data: &LeechData, popov: &PopovData, riccati0: &RiccatiSolution, p1: &CMatrix) -> Result<CMatrix> {
    let p = data.dims().p;
    let q0 = &riccati0.q;
    let q0_inv = matrix::hermitian_inverse(q0)?;
    let z0 = hermitian_part(&(&q0_inv - p1));
    let omega0 = p1 * matrix::hermitian_solve(&z0, &q0_inv)?;
    let c1 = data.d1.adjoint() * &riccati0.c0 + data.b1.adjoint() * q0 * &riccati0.a0;
    let coupling = &data.d1 - popov.gamma0.adjoint() * q0 * &data.b1;
    let m = eye(p)
        - &c1 * omega0 * c1.adjoint()
        - coupling.adjoint() * matrix::hermitian_solve(&riccati0.delta, &coupling)?
        - data.b1.adjoint() * q0 * &data.b1;
    Ok(hermitian_part(&m))
}

/// Minimal rank factor of the Gram defect; it must have `p - m` columns.
///
/// The defect is a contraction, so the rank cutoff is taken relative to 1.
pub fn theta0(gram_defect: &CMatrix, dims: Dims, rank_tol: f64) -> Result<CMatrix> {
    let theta = matrix::minimal_rank_factor_with_floor(gram_defect, rank_tol, 1.0)?;
    let expected = dims.p - dims.m;
    if theta.ncols() != expected {
        return Err(Error::RankDefect { expected, found: theta.ncols() });
    }
    Ok(theta)
}

/// `D2 - Γ^* Q B2`
pub fn k_coupling(data: &LeechData, popov: &PopovData, q: &CMatrix) -> CMatrix {
    &data.d2 - popov.gamma.adjoint() * q * &data.b2
}

#[derive(Debug, Clone)]
pub struct DeltaMatrices {
    pub delta0_sq: CMatrix,
    pub delta1_sq: CMatrix,
    pub delta0: CMatrix,
    pub delta1: CMatrix,
}

#[allow(clippy::too_many_arguments)]
fn delta_squares(
    data: &LeechData,
    popov: &PopovData,
    riccati: &RiccatiSolution,
    omega: &CMatrix,
    c2: &CMatrix,
    z_inv: &CMatrix,
    z0_inv: &CMatrix,
    theta0: &CMatrix,
) -> Result<(CMatrix, CMatrix)> {
    let Dims { p, m, q, .. } = data.dims();
    let qm = &riccati.q;
    let coupling = k_coupling(data, popov, qm);
    let d0 = eye(q)
        + c2 * omega * c2.adjoint()
        + coupling.adjoint() * matrix::hermitian_solve(&riccati.delta, &coupling)?
        + data.b2.adjoint() * qm * &data.b2;
    let bt = &data.b1 * theta0;
    let d1 = eye(p - m) + bt.adjoint() * (z_inv - z0_inv) * &bt;
    Ok((hermitian_part(&d0), hermitian_part(&d1)))
}

/// Recomputes `Δ0`, `Δ1` and their squares from solved data.
pub fn delta_matrices(data: &LeechData, derived: &DerivedMatrices, tol: f64) -> Result<DeltaMatrices> {
    let (delta0_sq, delta1_sq) = delta_squares(
        data,
        &derived.popov,
        &derived.riccati,
        &derived.omega,
        &derived.c2,
        &derived.z_inv,
        &derived.z0_inv,
        &derived.theta0,
    )?;
    roots(delta0_sq, delta1_sq, tol)
}

fn roots(delta0_sq: CMatrix, delta1_sq: CMatrix, tol: f64) -> Result<DeltaMatrices> {
    let breakdown = |name: &str, e: Error| Error::Breakdown(format!("{name} squared is not positive definite ({e})"));
    let delta0 = matrix::pd_sqrt(&delta0_sq, tol).map_err(|e| breakdown("Δ0", e))?;
    let delta1 = matrix::pd_sqrt(&delta1_sq, tol).map_err(|e| breakdown("Δ1", e))?;
    Ok(DeltaMatrices { delta0_sq, delta1_sq, delta0, delta1 })
}

/// Stein gramians `P_j - A P_j A^* = B_j B_j^*`.
pub fn gramians(data: &LeechData) -> Result<(CMatrix, CMatrix)> {
    let p1 = hermitian_part(&riccati::solve_stein(&data.a, &(&data.b1 * data.b1.adjoint()))?);
    let p2 = hermitian_part(&riccati::solve_stein(&data.a, &(&data.b2 * data.b2.adjoint()))?);
    Ok((p1, p2))
}

/// Decides suboptimality and computes all derived matrices.
///
/// A violated kernel condition is only logged here: it surfaces as a rank
/// defect of the Gram defect if it matters for the factorization.
pub fn solve(data: &LeechData, opts: &SolverOptions) -> Result<DerivedMatrices> {
    let report = validate(data, opts.tol);
    if !report.kernel_ok {
        log::warn!("[B1; D1] is not one-to-one (σmin/σmax = {:e})", report.kernel_ratio);
        ValidationReport { kernel_ok: true, ..report }.ensure()?;
    } else {
        report.ensure()?;
    }
    let dims = data.dims();
    let (p1, p2) = gramians(data)?;
    let popov = popov_data(data, &p1, &p2);

    let riccati0 = riccati::stabilizing_riccati(&data.a, &popov.gamma0, &popov.r10, &data.c, &opts.riccati)
        .map_err(|e| match e {
            Error::NoStabilizingSolution { reason, .. } => {
                Error::Infeasible(format!("T_G T_G^* is not strictly positive ({reason})"))
            }
            other => other,
        })?;
    let riccati = riccati::stabilizing_riccati(&data.a, &popov.gamma, &popov.r0, &data.c, &opts.riccati)?;
    log::debug!(
        "Riccati iterations: {} (K = 0: {}), residuals {:e} / {:e}",
        riccati.iterations,
        riccati0.iterations,
        riccati.residual,
        riccati0.residual
    );

    let q_inv = hermitian_part(&matrix::hermitian_inverse(&riccati.q).or_else(|_| matrix::inverse(&riccati.q))?);
    let z = hermitian_part(&(&q_inv + &p2 - &p1));
    let feasibility_margin = matrix::min_eigenvalue(&z)?;
    if !matrix::hermitian_posdef_check(&z, opts.tol)? {
        return Err(Error::Infeasible(format!(
            "Q^{{-1}} + P2 - P1 has smallest eigenvalue {feasibility_margin:e}"
        )));
    }
    let z_inv = hermitian_part(&matrix::hermitian_inverse(&z)?);

    let q0_inv = hermitian_part(&matrix::hermitian_inverse(&riccati0.q).or_else(|_| matrix::inverse(&riccati0.q))?);
    let z0 = hermitian_part(&(&q0_inv - &p1));
    if !matrix::hermitian_posdef_check(&z0, opts.tol)? {
        return Err(Error::Breakdown("Q0^{-1} - P1 is not positive definite".into()));
    }
    let z0_inv = hermitian_part(&matrix::hermitian_inverse(&z0)?);

    let (qm, a0, c0) = (&riccati.q, &riccati.a0, &riccati.c0);
    let omega = (&p1 - &p2) * &z_inv * &q_inv;
    let c1 = data.d1.adjoint() * c0 + data.b1.adjoint() * qm * a0;
    let c2 = data.d2.adjoint() * c0 + data.b2.adjoint() * qm * a0;
    let b0 = &data.b2 - &popov.gamma * matrix::hermitian_solve(&riccati.delta, &k_coupling(data, &popov, qm))?
        + a0 * &omega * c2.adjoint();

    let gram_defect = gram_defect(data, &popov, &riccati0, &p1)?;
    let theta0 = theta0(&gram_defect, dims, opts.rank_tol)?;

    let (delta0_sq, delta1_sq) = delta_squares(data, &popov, &riccati, &omega, &c2, &z_inv, &z0_inv, &theta0)?;
    let DeltaMatrices { delta0_sq, delta1_sq, delta0, delta1 } = roots(delta0_sq, delta1_sq, opts.tol)?;

    Ok(DerivedMatrices {
        dims,
        p1,
        p2,
        popov,
        riccati,
        riccati0,
        q_inv,
        z,
        z_inv,
        z0_inv,
        feasibility_margin,
        omega,
        c1,
        c2,
        b0,
        gram_defect,
        theta0,
        delta0_sq,
        delta1_sq,
        delta0,
        delta1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorConfig, InstanceKind};
    use crate::matrix::{real, zeros};

    fn scalar_problem() -> LeechData {
        LeechData::new(
            real(1, 1, &[0.5]),
            real(1, 1, &[1.0]),
            zeros(1, 0),
            real(1, 1, &[1.0]),
            real(1, 1, &[1.0]),
            zeros(1, 0),
        )
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let data = scalar_problem();
        assert!(validate(&data, 1e-9).passed());

        let mut bad = scalar_problem();
        bad.b1 = zeros(1, 2);
        bad.d1 = real(1, 2, &[1.0, 0.0]);
        let report = validate(&bad, 1e-9);
        assert!(!report.kernel_ok && report.stable && report.observable);

        let mut unstable = scalar_problem();
        unstable.a = real(1, 1, &[1.0]);
        let report = validate(&unstable, 1e-9);
        assert!(!report.stable);
        assert!(matches!(report.ensure(), Err(Error::Unstable(_))));
    }

    #[test]
    fn construction_checks_shapes() {
        let err = LeechData::new(
            real(1, 1, &[0.5]),
            zeros(2, 1),
            zeros(1, 0),
            real(1, 1, &[1.0]),
            real(1, 1, &[1.0]),
            zeros(1, 0),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn popov_static_identity() {
        let data = LeechData::new(zeros(0, 0), zeros(0, 2), zeros(0, 1), zeros(2, 0), eye(2), zeros(2, 1)).unwrap();
        let (p1, p2) = gramians(&data).unwrap();
        let pop = popov_data(&data, &p1, &p2);
        assert_eq!(pop.r0, eye(2));
        assert_eq!(pop.gamma.shape(), (0, 2));
    }

    #[test]
    fn static_row_gram_defect() {
        // G = [1 0]: T_G T_G^* = I and M = diag(0, 1)
        let data =
            LeechData::new(zeros(0, 0), zeros(0, 2), zeros(0, 0), zeros(1, 0), real(1, 2, &[1.0, 0.0]), zeros(1, 0))
                .unwrap();
        let derived = solve(&data, &SolverOptions::default()).unwrap();
        assert!((&derived.gram_defect - real(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-15);
        let t = &derived.theta0;
        assert_eq!(t.shape(), (2, 1));
        assert!((t * t.adjoint() - &derived.gram_defect).norm() < 1e-15);
    }

    #[test]
    fn square_g_has_empty_theta() {
        let derived = solve(&scalar_problem(), &SolverOptions::default()).unwrap();
        assert_eq!(derived.theta0.shape(), (1, 0));
        assert_eq!(derived.delta1.shape(), (0, 0));
        assert!(derived.gram_defect.norm() < 1e-10);
    }

    fn generated(kind: InstanceKind, seed: u64) -> LeechData {
        generate(&GeneratorConfig::new(3, 1, 3, 1, kind), seed).unwrap().data
    }

    #[test]
    fn popov_reevaluation() {
        let data = generated(InstanceKind::Feasible, 11);
        let (p1, p2) = gramians(&data).unwrap();
        let pop = popov_data(&data, &p1, &p2);
        let r0 = &data.d1 * data.d1.adjoint() - &data.d2 * data.d2.adjoint() + &data.c * (&p1 - &p2) * data.c.adjoint();
        assert!((&pop.r0 - r0).norm() < 1e-14);
        let gamma = &data.b1 * data.d1.adjoint() - &data.b2 * data.d2.adjoint() + &data.a * (&p1 - &p2) * data.c.adjoint();
        assert!((&pop.gamma - gamma).norm() < 1e-14);
    }

    #[test]
    fn zero_k_special_case() {
        let data = generated(InstanceKind::ZeroK, 12);
        let d = solve(&data, &SolverOptions::default()).unwrap();
        assert!((&d.popov.r0 - &d.popov.r10).norm() < 1e-14);
        assert!((&d.popov.gamma - &d.popov.gamma0).norm() < 1e-14);
        assert!(d.c2.norm() < 1e-14 && d.b0.norm() < 1e-14);
        assert!((&d.delta0 - eye(1)).norm() < 1e-12);
        assert!((&d.delta1 - eye(2)).norm() < 1e-12);
    }

    #[test]
    fn corona_special_case() {
        let data = generated(InstanceKind::Corona, 13);
        let d = solve(&data, &SolverOptions::default()).unwrap();
        assert!((&d.c2 - d.c0()).norm() < 1e-12);
        // B0 = A0 Ω C0^* - Γ Δ^{-1} when B2 = 0 and D2 = I
        let b0 = d.a0() * &d.omega * d.c0().adjoint() - &d.popov.gamma * matrix::hermitian_inverse(d.delta()).unwrap();
        assert!((&d.b0 - b0).norm() < 1e-10);
        // Δ1^2 - I is positive semidefinite
        assert!(matrix::min_eigenvalue(&(&d.delta1_sq - eye(2))).unwrap() > -1e-12);
    }

    #[test]
    fn scaled_up_k_is_infeasible() {
        let data = generated(InstanceKind::Feasible, 14).with_k_scaled(10.0);
        let err = solve(&data, &SolverOptions::default()).unwrap_err();
        assert!(err.is_infeasible(), "{err}");
    }

    #[test]
    fn delta_matrices_without_coupling() {
        // B2 = 0, D2 = 0 and B1 Θ0 = 0: G = [1 0] with K = 0
        let data =
            LeechData::new(zeros(0, 0), zeros(0, 2), zeros(0, 1), zeros(1, 0), real(1, 2, &[1.0, 0.0]), zeros(1, 1))
                .unwrap();
        let d = solve(&data, &SolverOptions::default()).unwrap();
        assert_eq!(d.delta0, eye(1));
        assert_eq!(d.delta1, eye(1));
    }
}
