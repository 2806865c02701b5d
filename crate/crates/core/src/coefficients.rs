//! Coefficient realizations of the solution parametrization
//!
//! ```text
//! X = (Υ12 + Υ11 Y)(Υ22 + Υ21 Y)^{-1}
//!   = Φ22 + Φ21 Y (I - Φ11 Y)^{-1} Φ12
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::leech::{self, DerivedMatrices, LeechData};
use crate::matrix::{self, block_diag, eye, hstack, vstack, zeros, CMatrix};
use crate::realization::{self, Realization};

/// The 2x2 block function `Υ` on the common state matrix `A0`.
///
/// Block rows have sizes `p`, `q`; block columns `k = p - m`, `q`.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub p: usize,
    pub m: usize,
    pub q: usize,
    pub k: usize,
    pub upsilon: Realization,
    pub theta0: CMatrix,
    pub delta0: CMatrix,
    pub delta1: CMatrix,
}

impl CoefficientSet {
    pub fn u11(&self) -> Realization {
        self.upsilon.rows(0, self.p).columns(0, self.k)
    }

    pub fn u12(&self) -> Realization {
        self.upsilon.rows(0, self.p).columns(self.k, self.q)
    }

    pub fn u21(&self) -> Realization {
        self.upsilon.rows(self.p, self.q).columns(0, self.k)
    }

    pub fn u22(&self) -> Realization {
        self.upsilon.rows(self.p, self.q).columns(self.k, self.q)
    }

    /// `Υ(z)` as one `(p + q) x (k + q)` matrix.
    pub fn evaluate(&self, z: Complex64) -> Result<CMatrix> {
        self.upsilon.evaluate(z)
    }

    /// Pointwise `(Υ12 + Υ11 Y)(Υ22 + Υ21 Y)^{-1}` for a value `Y` of size `k x q`.
    pub fn lft_at(&self, z: Complex64, y: &CMatrix) -> Result<CMatrix> {
        let u = self.evaluate(z)?;
        let ys = vstack(y, &eye(self.q))?;
        let num = u.rows(0, self.p) * &ys;
        let den = u.rows(self.p, self.q) * &ys;
        let inv = matrix::inverse(&den).map_err(|_| Error::Evaluation(format!("Υ22 + Υ21 Y is singular at z = {z}")))?;
        Ok(num * inv)
    }

    /// `Υ^* J1 Υ - J2` at `z`, with `J1 = diag(I_p, -I_q)` and `J2 = diag(I_k, -I_q)`.
    pub fn j_defect_at(&self, z: Complex64) -> Result<CMatrix> {
        let u = self.evaluate(z)?;
        let j1 = block_diag(&eye(self.p), &(-eye(self.q)));
        let j2 = block_diag(&eye(self.k), &(-eye(self.q)));
        Ok(u.adjoint() * j1 * &u - j2)
    }
}

/// Assembles `Υ` from the derived matrices.
pub fn build_upsilon(data: &LeechData, derived: &DerivedMatrices) -> Result<CoefficientSet> {
    let dims = derived.dims;
    let (p, m, q) = (dims.p, dims.m, dims.q);
    let k = p - m;
    let delta0_inv = matrix::hermitian_inverse(&derived.delta0)?;
    let delta1_inv = matrix::hermitian_inverse(&derived.delta1)?;
    let qm = derived.q();

    let theta_scaled = &derived.theta0 * &delta1_inv;
    let b_theta = &derived.q_inv * &derived.z_inv * &data.b1 * &theta_scaled;
    let b_right = &derived.b0 * &delta0_inv;
    let coupling = leech::k_coupling(data, &derived.popov, qm);
    let d12 = (data.d1.adjoint() * matrix::hermitian_solve(derived.delta(), &coupling)?
        + data.d1.adjoint() * derived.c0() * &derived.omega * derived.c2.adjoint()
        + data.b1.adjoint() * qm * &derived.b0)
        * &delta0_inv;

    let b = hstack(&(-b_theta), &b_right)?;
    let c = vstack(&derived.c1, &derived.c2)?;
    let d = vstack(&hstack(&theta_scaled, &d12)?, &hstack(&zeros(q, k), &derived.delta0)?)?;
    let upsilon = Realization::new(derived.a0().clone(), b, c, d)?
        .verify_stable(matrix::DEFAULT_TOL)
        .map_err(|e| Error::TheoryViolation(format!("coefficient state matrix A0: {e}")))?;
    Ok(CoefficientSet {
        p,
        m,
        q,
        k,
        upsilon,
        theta0: derived.theta0.clone(),
        delta0: derived.delta0.clone(),
        delta1: derived.delta1.clone(),
    })
}

/// Chain-scattering form of the parametrization.
#[derive(Debug, Clone)]
pub struct RedhefferCoefficients {
    pub phi11: Realization,
    pub phi12: Realization,
    pub phi21: Realization,
    pub phi22: Realization,
}

impl RedhefferCoefficients {
    /// Pointwise `Φ22 + Φ21 Y (I - Φ11 Y)^{-1} Φ12`.
    pub fn evaluate(&self, z: Complex64, y: &CMatrix) -> Result<CMatrix> {
        let (f11, f12) = (self.phi11.evaluate(z)?, self.phi12.evaluate(z)?);
        let (f21, f22) = (self.phi21.evaluate(z)?, self.phi22.evaluate(z)?);
        let inner = eye(f11.nrows()) - &f11 * y;
        let w = matrix::solve(&inner, &f12).map_err(|_| Error::Evaluation(format!("I - Φ11 Y is singular at z = {z}")))?;
        Ok(f22 + f21 * y * w)
    }
}

pub fn build_redheffer(coeffs: &CoefficientSet) -> Result<RedhefferCoefficients> {
    let (u11, u12, u21, u22) = (coeffs.u11(), coeffs.u12(), coeffs.u21(), coeffs.u22());
    let phi12 = u22.inverse()?;
    if !phi12.is_stable() {
        return Err(Error::TheoryViolation("Υ22 has an unstable inverse (expected outer)".into()));
    }
    let phi12_u21 = phi12.product(&u21)?;
    let phi11 = phi12_u21.neg();
    let phi21 = u11.sum(&u12.product(&phi12_u21)?.neg())?;
    let phi22 = u12.product(&phi12)?;
    Ok(RedhefferCoefficients { phi11, phi12, phi21, phi22 })
}

/// The solution at `Y = 0`, `Υ12 Υ22^{-1}`.
pub fn central_solution(coeffs: &CoefficientSet) -> Result<Realization> {
    let y = Realization::constant(zeros(coeffs.k, coeffs.q));
    realization::apply_lft(coeffs, &y, 1)
}
