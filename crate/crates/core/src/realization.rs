//! State-space calculus for rational matrix functions `F(z) = D + z C (I - z A)^{-1} B`.
//!
//! All compositions are the textbook series/parallel constructions; state
//! dimensions add up and nothing is minimized.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::matrix::{self, block_diag, c64, eye, hstack, vstack, zeros, CMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
    stable: bool,
}

impl Realization {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix, d: CMatrix) -> Result<Self> {
        let ns = a.nrows();
        if a.ncols() != ns || b.nrows() != ns || c.ncols() != ns || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "realization blocks A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        if ![&a, &b, &c, &d].iter().all(|m| matrix::is_finite(m)) {
            return Err(Error::InvalidData("realization has non-finite entries".into()));
        }
        Ok(Realization { a, b, c, d, stable: ns == 0 })
    }

    /// Static function `F(z) = d`.
    pub fn constant(d: CMatrix) -> Self {
        let (r, c) = d.shape();
        Realization { a: zeros(0, 0), b: zeros(0, c), c: zeros(r, 0), d, stable: true }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(eye(n))
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    /// Whether stability of `A` has been verified.
    pub fn is_stable(&self) -> bool {
        self.stable
    }

    /// Verifies Schur stability of `A` and records it.
    pub fn verify_stable(mut self, tol: f64) -> Result<Self> {
        if matrix::is_schur_stable(&self.a, tol)? {
            self.stable = true;
            Ok(self)
        } else {
            Err(Error::Unstable(format!(
                "realization state matrix (spectral radius ≈ {:.6})",
                matrix::spectral_radius_estimate(&self.a)
            )))
        }
    }

    /// Marks the realization stable when its state matrix passes the test.
    pub fn check_stable(mut self, tol: f64) -> Result<Self> {
        self.stable = matrix::is_schur_stable(&self.a, tol)?;
        Ok(self)
    }

    pub fn evaluate(&self, z: Complex64) -> Result<CMatrix> {
        let n = self.states();
        if n == 0 || z == c64(0.0, 0.0) {
            return Ok(self.d.clone());
        }
        let resolvent = eye(n) - &self.a * z;
        let x = matrix::solve(&resolvent, &self.b)
            .map_err(|_| Error::Evaluation(format!("I - zA is singular at z = {z}")))?;
        Ok(&self.d + &self.c * x * z)
    }

    /// Taylor coefficients `F_0 = D`, `F_j = C A^{j-1} B`, for `j < count`.
    pub fn taylor_blocks(&self, count: usize) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(self.d.clone());
        let mut ab = self.b.clone();
        for _ in 1..count {
            out.push(&self.c * &ab);
            ab = &self.a * ab;
        }
        out
    }

    pub fn adjoint_constant(&self) -> CMatrix {
        self.d.adjoint()
    }

    /// `F(z) M` for a constant `M`.
    pub fn mul_right(&self, m: &CMatrix) -> Result<Self> {
        if m.nrows() != self.inputs() {
            return Err(Error::Dimension(format!(
                "right factor has {} rows, function has {} inputs",
                m.nrows(),
                self.inputs()
            )));
        }
        Ok(Realization { a: self.a.clone(), b: &self.b * m, c: self.c.clone(), d: &self.d * m, stable: self.stable })
    }

    /// `M F(z)` for a constant `M`.
    pub fn mul_left(&self, m: &CMatrix) -> Result<Self> {
        if m.ncols() != self.outputs() {
            return Err(Error::Dimension(format!(
                "left factor has {} columns, function has {} outputs",
                m.ncols(),
                self.outputs()
            )));
        }
        Ok(Realization { a: self.a.clone(), b: self.b.clone(), c: m * &self.c, d: m * &self.d, stable: self.stable })
    }

    pub fn neg(&self) -> Self {
        let minus = c64(-1.0, 0.0);
        Realization { a: self.a.clone(), b: self.b.clone(), c: &self.c * minus, d: &self.d * minus, stable: self.stable }
    }

    /// Series connection `F(z) G(z)`.
    pub fn product(&self, g: &Realization) -> Result<Self> {
        if self.inputs() != g.outputs() {
            return Err(Error::Dimension(format!(
                "product of {}x{} and {}x{} functions",
                self.outputs(),
                self.inputs(),
                g.outputs(),
                g.inputs()
            )));
        }
        let (n1, n2) = (self.states(), g.states());
        let mut a = block_diag(&self.a, &g.a);
        a.view_mut((0, n1), (n1, n2)).copy_from(&(&self.b * &g.c));
        let b = vstack(&(&self.b * &g.d), &g.b)?;
        let c = hstack(&self.c, &(&self.d * &g.c))?;
        let d = &self.d * &g.d;
        Ok(Realization { a, b, c, d, stable: self.stable && g.stable })
    }

    /// Parallel connection `F(z) + G(z)`.
    pub fn sum(&self, g: &Realization) -> Result<Self> {
        if self.d.shape() != g.d.shape() {
            return Err(Error::Dimension(format!(
                "sum of {:?} and {:?} functions",
                self.d.shape(),
                g.d.shape()
            )));
        }
        Ok(Realization {
            a: block_diag(&self.a, &g.a),
            b: vstack(&self.b, &g.b)?,
            c: hstack(&self.c, &g.c)?,
            d: &self.d + &g.d,
            stable: self.stable && g.stable,
        })
    }

    /// `[F(z) G(z)]`.
    pub fn hconcat(&self, g: &Realization) -> Result<Self> {
        if self.outputs() != g.outputs() {
            return Err(Error::Dimension(format!(
                "horizontal concatenation of {} and {} outputs",
                self.outputs(),
                g.outputs()
            )));
        }
        Ok(Realization {
            a: block_diag(&self.a, &g.a),
            b: block_diag(&self.b, &g.b),
            c: hstack(&self.c, &g.c)?,
            d: hstack(&self.d, &g.d)?,
            stable: self.stable && g.stable,
        })
    }

    /// `[F(z); G(z)]`.
    pub fn vconcat(&self, g: &Realization) -> Result<Self> {
        if self.inputs() != g.inputs() {
            return Err(Error::Dimension(format!(
                "vertical concatenation of {} and {} inputs",
                self.inputs(),
                g.inputs()
            )));
        }
        Ok(Realization {
            a: block_diag(&self.a, &g.a),
            b: vstack(&self.b, &g.b)?,
            c: block_diag(&self.c, &g.c),
            d: vstack(&self.d, &g.d)?,
            stable: self.stable && g.stable,
        })
    }

    /// Realization of `F(z)^{-1}`; requires `D` invertible. The result is
    /// marked stable only if its state matrix `A - B D^{-1} C` is stable.
    pub fn inverse(&self) -> Result<Self> {
        if self.outputs() != self.inputs() {
            return Err(Error::Dimension(format!(
                "inverse of a non-square {}x{} function",
                self.outputs(),
                self.inputs()
            )));
        }
        let d_inv = matrix::inverse(&self.d).map_err(|_| Error::Singular("D term is not invertible at z = 0".into()))?;
        let b = &self.b * &d_inv;
        let a = &self.a - &b * &self.c;
        let c = -(&d_inv * &self.c);
        Realization { a, b, c, d: d_inv, stable: false }.check_stable(matrix::DEFAULT_TOL)
    }

    /// Rows `[start, start + len)` of the function, sharing the state.
    pub fn rows(&self, start: usize, len: usize) -> Self {
        Realization {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.rows(start, len).into_owned(),
            d: self.d.rows(start, len).into_owned(),
            stable: self.stable,
        }
    }

    /// Columns `[start, start + len)` of the function, sharing the state.
    pub fn columns(&self, start: usize, len: usize) -> Self {
        Realization {
            a: self.a.clone(),
            b: self.b.columns(start, len).into_owned(),
            c: self.c.clone(),
            d: self.d.columns(start, len).into_owned(),
            stable: self.stable,
        }
    }

    /// Given a stacked function `[N(z); M(z)]` whose bottom `outputs - split`
    /// rows form a square `M`, returns `N(z) M(z)^{-1}` on the shared state.
    pub fn right_quotient(&self, split: usize) -> Result<Self> {
        let den_rows = self.outputs() - split;
        if den_rows != self.inputs() {
            return Err(Error::Dimension(format!(
                "denominator is {}x{}, must be square",
                den_rows,
                self.inputs()
            )));
        }
        let num = self.rows(0, split);
        let den = self.rows(split, den_rows);
        let d_inv =
            matrix::inverse(&den.d).map_err(|_| Error::Singular("denominator is not invertible at z = 0".into()))?;
        let b = &self.b * &d_inv;
        let a = &self.a - &b * &den.c;
        let c = &num.c - &num.d * &d_inv * &den.c;
        let d = &num.d * &d_inv;
        Realization { a, b, c, d, stable: false }.check_stable(matrix::DEFAULT_TOL)
    }
}

/// Result of [`hinf_norm_estimate`]; `value` is a lower bound of the supremum.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    /// Angle of the maximizer on the unit circle.
    pub theta: f64,
    /// Grid spacing before refinement.
    pub resolution: f64,
}

fn circle_norm(f: &Realization, theta: f64) -> f64 {
    f.evaluate(Complex64::from_polar(1.0, theta)).map(|v| matrix::norm2(&v)).unwrap_or(f64::INFINITY)
}

/// Unit-circle grid maximum of `||F(e^{iθ})||` followed by one golden-section
/// refinement around the best grid point.
pub fn hinf_norm_estimate(f: &Realization, grid: usize) -> NormEstimate {
    let grid = grid.max(1);
    let resolution = TAU / grid as f64;
    if f.states() == 0 {
        return NormEstimate { value: matrix::norm2(&f.d), theta: 0.0, resolution };
    }
    let (mut best_theta, mut best) = (0.0, f64::NEG_INFINITY);
    for j in 0..grid {
        let theta = j as f64 * resolution;
        let v = circle_norm(f, theta);
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best_theta - resolution, best_theta + resolution);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (circle_norm(f, x1), circle_norm(f, x2));
    for _ in 0..60 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = circle_norm(f, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = circle_norm(f, x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best {
            best = v;
            best_theta = x.rem_euclid(TAU);
        }
    }
    NormEstimate { value: best, theta: best_theta, resolution }
}

/// Admissibility tolerance on `||Y||∞` for [`apply_lft`].
pub const PARAMETER_NORM_TOL: f64 = 1e-9;

/// Checks that `y` is a stable `(p-m) x q` contraction for `coeffs`.
pub fn check_parameter(coeffs: &CoefficientSet, y: &Realization, grid: usize) -> Result<()> {
    let (k, q) = (coeffs.k, coeffs.q);
    if y.outputs() != k || y.inputs() != q {
        return Err(Error::ContractViolation(format!(
            "parameter must be {k}x{q}, got {}x{}",
            y.outputs(),
            y.inputs()
        )));
    }
    if !matrix::is_schur_stable(&y.a, matrix::DEFAULT_TOL)? {
        return Err(Error::ContractViolation("parameter realization is not stable".into()));
    }
    let est = hinf_norm_estimate(y, grid);
    if est.value > 1.0 + PARAMETER_NORM_TOL {
        return Err(Error::ContractViolation(format!("parameter has sup norm ≈ {:.12} > 1", est.value)));
    }
    Ok(())
}

/// `X = (Υ12 + Υ11 Y)(Υ22 + Υ21 Y)^{-1}` as a realization.
///
/// Numerator and denominator come out of one product `Υ [Y; I]` on a shared
/// state, so `X` has `states(Υ) + states(Y)` states.
pub fn apply_lft(coeffs: &CoefficientSet, y: &Realization, grid: usize) -> Result<Realization> {
    check_parameter(coeffs, y, grid)?;
    let stacked = y.vconcat(&Realization::identity(coeffs.q))?;
    let joint = coeffs.upsilon.product(&stacked)?;
    let x = joint.right_quotient(coeffs.p)?;
    if !x.is_stable() {
        return Err(Error::TheoryViolation(
            "denominator Υ22 + Υ21 Y has an unstable inverse (expected outer)".into(),
        ));
    }
    Ok(x)
}

/// Evenly spaced points `e^{2πij/count}` on the unit circle.
pub fn circle_points(count: usize) -> Vec<Complex64> {
    (0..count).map(|j| Complex64::from_polar(1.0, TAU * j as f64 / count as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::real;
    use crate::matrix::testing::random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stable(rng: &mut ChaCha8Rng, n: usize, outs: usize, ins: usize) -> Realization {
        let a = random(rng, n, n);
        let rho = matrix::spectral_radius_estimate(&a).max(1e-3);
        let a = a * c64(0.8 / rho, 0.0);
        Realization::new(a, random(rng, n, ins), random(rng, outs, n), random(rng, outs, ins))
            .unwrap()
            .verify_stable(1e-9)
            .unwrap()
    }

    fn random_disc_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
        (0..count)
            .map(|_| Complex64::from_polar(0.99 * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>()))
            .collect()
    }

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> Realization {
        Realization::new(real(1, 1, &[a]), real(1, 1, &[b]), real(1, 1, &[c]), real(1, 1, &[d])).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let f = scalar(0.5, 1.0, 1.0, 0.0);
        assert_eq!(f.evaluate(c64(0.0, 0.0)).unwrap(), real(1, 1, &[0.0]));
        let v = f.evaluate(c64(0.5, 0.0)).unwrap()[(0, 0)];
        assert!((v - c64(2.0 / 3.0, 0.0)).norm() < 1e-15);
        let k = Realization::constant(real(1, 2, &[1.0, 2.0]));
        assert_eq!(k.evaluate(c64(0.3, 0.7)).unwrap(), real(1, 2, &[1.0, 2.0]));
    }

    #[test]
    fn evaluation_at_pole_fails() {
        let f = scalar(2.0, 1.0, 1.0, 0.0);
        assert!(matches!(f.evaluate(c64(0.5, 0.0)), Err(Error::Evaluation(_))));
    }

    #[test]
    fn taylor_blocks_of_scalar() {
        let f = scalar(0.5, 1.0, 1.0, 0.0);
        let t: Vec<f64> = f.taylor_blocks(3).iter().map(|m| m[(0, 0)].re).collect();
        assert_eq!(t, vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn algebra_is_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_stable(&mut rng, 3, 2, 3);
        let g = random_stable(&mut rng, 2, 3, 2);
        let h = random_stable(&mut rng, 2, 2, 3);
        let fg = f.product(&g).unwrap();
        let fh = f.sum(&h).unwrap();
        let cat = f.hconcat(&Realization::constant(random(&mut rng, 2, 1))).unwrap();
        let stack = f.vconcat(&h).unwrap();
        assert_eq!(fg.states(), 5);
        for z in random_disc_points(&mut rng, 32) {
            let (fz, gz, hz) = (f.evaluate(z).unwrap(), g.evaluate(z).unwrap(), h.evaluate(z).unwrap());
            let tol = 1e-10 * (1.0 + fz.norm() * gz.norm());
            assert!((fg.evaluate(z).unwrap() - &fz * &gz).norm() < tol);
            assert!((fh.evaluate(z).unwrap() - (&fz + &hz)).norm() < tol);
            assert!((cat.evaluate(z).unwrap().columns(0, 3) - &fz).norm() < tol);
            assert!((stack.evaluate(z).unwrap() - vstack(&fz, &hz).unwrap()).norm() < tol);
        }
        for z in circle_points(16) {
            let id = f.product(&Realization::identity(3)).unwrap();
            assert!((id.evaluate(z).unwrap() - f.evaluate(z).unwrap()).norm() < 1e-12);
        }
        let zero = c64(0.0, 0.0);
        assert_eq!(fh.evaluate(zero).unwrap(), &f.d + &h.d);
    }

    #[test]
    fn algebra_rejects_mismatch() {
        let f = Realization::constant(zeros(2, 3));
        let g = Realization::constant(zeros(2, 3));
        assert!(matches!(f.product(&g), Err(Error::Dimension(_))));
        assert!(matches!(f.sum(&Realization::constant(zeros(3, 3))), Err(Error::Dimension(_))));
        assert!(matches!(f.inverse(), Err(Error::Dimension(_))));
        assert!(matches!(Realization::constant(zeros(2, 2)).inverse(), Err(Error::Singular(_))));
    }

    #[test]
    fn inverse_is_pointwise_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut f = random_stable(&mut rng, 3, 2, 2);
        f.d = real(2, 2, &[3.0, 0.2, -0.1, 2.5]);
        let inv = f.inverse().unwrap();
        let back = inv.inverse().unwrap();
        for z in circle_points(16) {
            let fz = f.evaluate(z).unwrap();
            if let Ok(iz) = inv.evaluate(z) {
                assert!((&fz * iz - eye(2)).norm() < 1e-9);
            }
            assert!((back.evaluate(z).unwrap() - fz).norm() < 1e-9);
        }
        let k = Realization::constant(real(1, 1, &[4.0])).inverse().unwrap();
        assert_eq!(k.d, real(1, 1, &[0.25]));
        assert!(k.is_stable());
    }

    #[test]
    fn right_quotient_matches_pointwise_division() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut joint = random_stable(&mut rng, 3, 4, 2);
        joint.d.view_mut((2, 0), (2, 2)).copy_from(&real(2, 2, &[4.0, 0.1, 0.0, 4.0]));
        let x = joint.right_quotient(2).unwrap();
        for z in random_disc_points(&mut rng, 16) {
            let jz = joint.evaluate(z).unwrap();
            let expected = jz.rows(0, 2) * matrix::inverse(&jz.rows(2, 2).into_owned()).unwrap();
            assert!((x.evaluate(z).unwrap() - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn norm_examples() {
        let k = Realization::constant(real(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        let est = hinf_norm_estimate(&k, 512);
        assert!((est.value - matrix::norm2(&k.d)).abs() < 1e-15);

        let shift = scalar(0.0, 1.0, 1.0, 0.0);
        assert!((hinf_norm_estimate(&shift, 512).value - 1.0).abs() < 1e-12);

        // |z / (1 - z/2)| peaks at z = 1 with value 2
        let f = scalar(0.5, 1.0, 1.0, 0.0);
        let est = hinf_norm_estimate(&f, 512);
        assert!((est.value - 2.0).abs() < 1e-12);
        assert!(est.theta.abs() < 1e-6 || (est.theta - TAU).abs() < 1e-6);
    }

    #[test]
    fn refinement_finds_off_grid_peak() {
        // |z / (1 - 0.9 e^{iφ} z)| peaks at θ = -φ with value 10
        let phi = 0.123_456;
        let f = Realization::new(
            CMatrix::from_element(1, 1, Complex64::from_polar(0.9, phi)),
            real(1, 1, &[1.0]),
            real(1, 1, &[1.0]),
            real(1, 1, &[0.0]),
        )
        .unwrap();
        let est = hinf_norm_estimate(&f, 16);
        assert!((est.value - 10.0).abs() < 1e-9, "{}", est.value);
        assert!((est.theta - (TAU - phi)).abs() < 1e-6);
    }
}
