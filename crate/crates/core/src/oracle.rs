//! Truncated block Toeplitz operators and the operator-valued formulas they
//! approximate.
//!
//! Sequences are truncated to `N` blocks. `S` is the forward block shift, so
//! `S^*` drops the first block; `E` embeds into the first block. Row vectors
//! times `(I - z S^*)^{-1}` are exact finite Neumann sums on the truncation.

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::leech::LeechData;
use crate::matrix::{self, eye, hermitian_part, zeros, CMatrix};
use crate::realization::Realization;
use crate::riccati;

type Chol = Cholesky<Complex64, nalgebra::Dyn>;

/// First `N` Taylor blocks of a stable function and the lower triangular block
/// Toeplitz matrix they define.
#[derive(Debug, Clone)]
pub struct ToeplitzTruncation {
    pub blocks: Vec<CMatrix>,
    pub rows: usize,
    pub cols: usize,
    /// Bound `ρ̂ < 1` with `||A^k|| <= sqrt(κ) ρ̂^k`.
    pub contraction: f64,
    /// Bound on the norm of the first omitted block.
    pub tail_bound: f64,
}

impl ToeplitzTruncation {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn matrix(&self) -> CMatrix {
        let n = self.n_blocks();
        let (r, c) = (self.rows, self.cols);
        let mut t = zeros(n * r, n * c);
        for j in 0..n {
            for (d, block) in self.blocks.iter().enumerate().take(n - j) {
                t.view_mut(((j + d) * r, j * c), (r, c)).copy_from(block);
            }
        }
        t
    }

    /// `T E`, the stacked blocks.
    pub fn first_column(&self) -> CMatrix {
        let n = self.n_blocks();
        let mut out = zeros(n * self.rows, self.cols);
        for (j, block) in self.blocks.iter().enumerate() {
            out.view_mut((j * self.rows, 0), (self.rows, self.cols)).copy_from(block);
        }
        out
    }
}

/// Contraction bound from `X - A X A^* = I`: `ρ̂ = sqrt(1 - 1/λmax(X))` and `κ(X)`.
fn contraction_bound(a: &CMatrix) -> Result<(f64, f64)> {
    if a.nrows() == 0 {
        return Ok((0.0, 1.0));
    }
    let x = riccati::solve_stein(a, &eye(a.nrows()))?;
    let ev = matrix::hermitian_eigenvalues(&x)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    Ok(((1.0 - 1.0 / hi).max(0.0).sqrt(), hi / lo))
}

pub fn truncate(f: &Realization, n_blocks: usize) -> Result<ToeplitzTruncation> {
    if n_blocks == 0 {
        return Err(Error::Dimension("truncation depth must be at least 1".into()));
    }
    if !matrix::is_schur_stable(&f.a, matrix::DEFAULT_TOL)? {
        return Err(Error::Unstable("truncated function".into()));
    }
    let (rho, kappa) = contraction_bound(&f.a)?;
    let tail_bound = if f.states() == 0 {
        0.0
    } else {
        matrix::norm2(&f.c) * matrix::norm2(&f.b) * kappa.sqrt() * rho.powi(n_blocks as i32 - 1)
    };
    Ok(ToeplitzTruncation {
        blocks: f.taylor_blocks(n_blocks),
        rows: f.outputs(),
        cols: f.inputs(),
        contraction: rho,
        tail_bound,
    })
}

/// `S^* x`: block rows of size `b` move up by one, the last becomes zero.
pub fn shift_up(x: &CMatrix, b: usize) -> CMatrix {
    let rows = x.nrows();
    let mut out = zeros(rows, x.ncols());
    if rows > b {
        out.rows_mut(0, rows - b).copy_from(&x.rows(b, rows - b));
    }
    out
}

/// `S x`: block rows of size `b` move down by one, the first becomes zero.
pub fn shift_down(x: &CMatrix, b: usize) -> CMatrix {
    let rows = x.nrows();
    let mut out = zeros(rows, x.ncols());
    if rows > b {
        out.rows_mut(b, rows - b).copy_from(&x.rows(0, rows - b));
    }
    out
}

/// `E^* (I - z S^*)^{-1} y = Σ_s z^s y_s` for `y` made of block rows of size `b`.
pub fn block_series(y: &CMatrix, b: usize, z: Complex64) -> CMatrix {
    let n = if b == 0 { 0 } else { y.nrows() / b };
    let mut acc = zeros(b, y.ncols());
    for s in (0..n).rev() {
        acc = acc * z + y.rows(s * b, b);
    }
    acc
}

/// `w (I - z S^*)^{-1} x` for a row operator `w` whose columns come in blocks of
/// size `b`; the row resolvent obeys `r_j = w_j + z r_{j-1}`.
pub fn row_resolvent_apply(w: &CMatrix, b: usize, z: Complex64, x: &CMatrix) -> CMatrix {
    let n = if b == 0 { 0 } else { w.ncols() / b };
    let mut r = zeros(w.nrows(), b);
    let mut acc = zeros(w.nrows(), x.ncols());
    for j in 0..n {
        r = w.columns(j * b, b) + r * z;
        acc += &r * x.rows(j * b, b);
    }
    acc
}

/// Full row `w (I - z S^*)^{-1}`.
pub fn row_resolvent(w: &CMatrix, b: usize, z: Complex64) -> CMatrix {
    let n = if b == 0 { 0 } else { w.ncols() / b };
    let mut out = zeros(w.nrows(), w.ncols());
    let mut r = zeros(w.nrows(), b);
    for j in 0..n {
        r = w.columns(j * b, b) + r * z;
        out.columns_mut(j * b, b).copy_from(&r);
    }
    out
}

fn cholesky(m: &CMatrix) -> Option<Chol> {
    m.clone().cholesky()
}

/// Smallest eigenvalue of the truncated `T_G T_G^* - T_K T_K^*`.
pub fn positivity_margin(tg: &ToeplitzTruncation, tk: &ToeplitzTruncation) -> Result<f64> {
    if tg.n_blocks() != tk.n_blocks() || tg.rows != tk.rows {
        return Err(Error::Dimension("incompatible truncations".into()));
    }
    let (g, k) = (tg.matrix(), tk.matrix());
    matrix::min_eigenvalue(&hermitian_part(&(&g * g.adjoint() - &k * k.adjoint())))
}

/// Truncated operators of one problem instance with the Gram matrices factored.
pub struct TruncatedLeech {
    pub n_blocks: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub tg: ToeplitzTruncation,
    pub tk: ToeplitzTruncation,
    tg_mat: CMatrix,
    tk_mat: CMatrix,
    /// `T_G T_G^*`
    rg: CMatrix,
    /// `T_G T_G^* - T_K T_K^*`
    rd: CMatrix,
    rg_chol: Chol,
    rd_chol: Option<Chol>,
}

impl TruncatedLeech {
    pub fn new(data: &LeechData, n_blocks: usize) -> Result<Self> {
        let dims = data.dims();
        let tg = truncate(&data.g(), n_blocks)?;
        let tk = truncate(&data.k(), n_blocks)?;
        let tg_mat = tg.matrix();
        let tk_mat = tk.matrix();
        let rg = hermitian_part(&(&tg_mat * tg_mat.adjoint()));
        let rd = hermitian_part(&(&rg - &tk_mat * tk_mat.adjoint()));
        let rg_chol =
            cholesky(&rg).ok_or_else(|| Error::Singular("truncated T_G T_G^* is not positive definite".into()))?;
        let rd_chol = cholesky(&rd);
        Ok(TruncatedLeech {
            n_blocks,
            m: dims.m,
            p: dims.p,
            q: dims.q,
            tg,
            tk,
            tg_mat,
            tk_mat,
            rg,
            rd,
            rg_chol,
            rd_chol,
        })
    }

    pub fn tg_matrix(&self) -> &CMatrix {
        &self.tg_mat
    }

    pub fn tk_matrix(&self) -> &CMatrix {
        &self.tk_mat
    }

    pub fn gram(&self) -> &CMatrix {
        &self.rg
    }

    pub fn defect_gram(&self) -> &CMatrix {
        &self.rd
    }

    pub fn positivity_margin(&self) -> Result<f64> {
        matrix::min_eigenvalue(&self.rd)
    }

    /// Whether the truncated `T_G T_G^* - T_K T_K^*` admits a Cholesky factor.
    pub fn is_positive(&self) -> bool {
        self.rd_chol.is_some()
    }

    fn rd_chol(&self) -> Result<&Chol> {
        self.rd_chol
            .as_ref()
            .ok_or_else(|| Error::Infeasible("truncated T_G T_G^* - T_K T_K^* is not positive definite".into()))
    }

    /// `(T_G T_G^*)^{-1} x`
    pub fn gram_solve(&self, x: &CMatrix) -> CMatrix {
        self.rg_chol.solve(x)
    }

    /// `(T_G T_G^* - T_K T_K^*)^{-1} x`
    pub fn defect_solve(&self, x: &CMatrix) -> Result<CMatrix> {
        Ok(self.rd_chol()?.solve(x))
    }

    /// `T_G E_p`
    pub fn g_column(&self) -> CMatrix {
        self.tg.first_column()
    }

    /// `T_K E_q`
    pub fn k_column(&self) -> CMatrix {
        self.tk.first_column()
    }

    /// `I_p - E_p^* T_G^* (T_G T_G^*)^{-1} T_G E_p`
    pub fn gram_defect(&self) -> CMatrix {
        let g = self.g_column();
        hermitian_part(&(eye(self.p) - g.adjoint() * self.gram_solve(&g)))
    }

    /// `Λ = T_G^* (T_G T_G^*)^{-1} T_K`
    pub fn lambda(&self) -> CMatrix {
        self.tg_mat.adjoint() * self.gram_solve(&self.tk_mat)
    }

    /// `N = S_m^* T_G E_p Θ0`
    pub fn n_operator(&self, theta0: &CMatrix) -> CMatrix {
        shift_up(&self.g_column(), self.m) * theta0
    }

    /// `Δ0^2` and `Δ1^2` from the operator formulas.
    pub fn delta_squares(&self, theta0: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        let kc = self.k_column();
        let d0 = eye(self.q) + kc.adjoint() * self.defect_solve(&kc)?;
        let n = self.n_operator(theta0);
        let diff = self.defect_solve(&n)? - self.gram_solve(&n);
        let d1 = eye(theta0.ncols()) + n.adjoint() * diff;
        Ok((hermitian_part(&d0), hermitian_part(&d1)))
    }

    pub fn theta(&self, theta0: &CMatrix) -> ThetaOracle {
        let n = self.n_operator(theta0);
        let gn = self.gram_solve(&n);
        // Taylor blocks Θ_{s+1} = -(T_G^* (T_G T_G^*)^{-1} N)_s
        let x = self.tg_mat.adjoint() * &gn;
        ThetaOracle {
            p: self.p,
            m: self.m,
            theta0: theta0.clone(),
            g_row: self.g_column().adjoint(),
            gn,
            tail: x,
        }
    }

    pub fn upsilon(&self, theta0: &CMatrix) -> Result<UpsilonOracle> {
        let (d0_sq, d1_sq) = self.delta_squares(theta0)?;
        let delta0 = matrix::pd_sqrt(&d0_sq, 0.0)?;
        let delta1 = matrix::pd_sqrt(&d1_sq, 0.0)?;
        let delta0_inv = matrix::hermitian_inverse(&delta0)?;
        let delta1_inv = matrix::hermitian_inverse(&delta1)?;
        let n = self.n_operator(theta0);
        let kc = self.k_column();
        let rd_n = self.defect_solve(&n)? * &delta1_inv;
        let rd_k = self.defect_solve(&kc)?;
        let g_row = self.g_column().adjoint();
        let k_row = kc.adjoint();
        let u12_const = &g_row * &rd_k * &delta0_inv;
        let shifted_rd_k = shift_up(&rd_k, self.m) * &delta0_inv;
        Ok(UpsilonOracle {
            p: self.p,
            m: self.m,
            q: self.q,
            k: theta0.ncols(),
            u11_const: theta0 * &delta1_inv,
            u12_const,
            g_row,
            k_row,
            rd_n,
            shifted_rd_k,
            delta0_sq: d0_sq,
            delta1_sq: d1_sq,
            delta0,
            delta1,
        })
    }

    pub fn appendix(&self, theta0: &CMatrix) -> Result<AppendixOracle> {
        let (nb, p, q) = (self.n_blocks, self.p, self.q);
        let k = theta0.ncols();
        let lambda = self.lambda();
        let defect = hermitian_part(&(eye(nb * q) - lambda.adjoint() * &lambda));
        let d_chol = cholesky(&defect).ok_or_else(|| Error::Infeasible("truncated Λ is not a strict contraction".into()))?;
        let eq = eye(nb * q).columns(0, q).into_owned();
        let d_inv_eq = d_chol.solve(&eq);
        let delta0_sq = hermitian_part(&d_inv_eq.rows(0, q).into_owned());
        let delta0 = matrix::pd_sqrt(&delta0_sq, 0.0)?;
        let delta0_inv = matrix::hermitian_inverse(&delta0)?;
        let delta0_inv_sq = &delta0_inv * &delta0_inv;

        // M = S_q^* - S_q^* D^{-1} E_q Δ0^{-2} E_q^*
        let mut big_m = shift_up(&eye(nb * q), q);
        let corr = shift_up(&d_inv_eq, q) * &delta0_inv_sq;
        let mut head = big_m.columns_mut(0, q);
        head -= &corr;

        let theta_oracle = self.theta(theta0);
        let t_theta_col = theta_oracle.taylor_column(nb);
        let shifted = shift_up(&t_theta_col, p);
        let lam_star_shifted = lambda.adjoint() * &shifted;
        let b_nabla = d_chol.solve(&lam_star_shifted);
        // h = E_k^* T_Θ^* S_p Λ = (Λ^* S_p^* T_Θ E_k)^*
        let h = lam_star_shifted.adjoint();
        let delta1_sq = hermitian_part(&(eye(k) + &h * &b_nabla));
        let delta1 = matrix::pd_sqrt(&delta1_sq, 0.0)?;
        let delta1_inv = matrix::hermitian_inverse(&delta1)?;
        let m_eq = big_m.columns(0, q).into_owned();
        Ok(AppendixOracle {
            p,
            q,
            k,
            big_m,
            b_nabla,
            h,
            m_eq,
            lambda_eq: lambda.columns(0, q).into_owned(),
            lambda_d_inv_eq: &lambda * &d_inv_eq,
            d_inv_eq,
            theta: theta_oracle,
            delta0,
            delta0_inv,
            delta1,
            delta1_inv,
            delta0_sq,
            delta1_sq,
        })
    }
}

/// `Θ(z) = Θ0 - z E_p^* T_G^* (I - z S_m^*)^{-1} (T_G T_G^*)^{-1} N`.
pub struct ThetaOracle {
    p: usize,
    m: usize,
    pub theta0: CMatrix,
    g_row: CMatrix,
    gn: CMatrix,
    tail: CMatrix,
}

impl ThetaOracle {
    pub fn at(&self, z: Complex64) -> CMatrix {
        &self.theta0 - row_resolvent_apply(&self.g_row, self.m, z, &self.gn) * z
    }

    /// `Θ_0, ..., Θ_{count-1}`.
    pub fn taylor_blocks(&self, count: usize) -> Vec<CMatrix> {
        let n = self.tail.nrows() / self.p.max(1);
        (0..count)
            .map(|s| match s {
                0 => self.theta0.clone(),
                s if s - 1 < n => -self.tail.rows((s - 1) * self.p, self.p).into_owned(),
                _ => zeros(self.p, self.theta0.ncols()),
            })
            .collect()
    }

    /// `T_Θ E_k` truncated to `count` blocks.
    pub fn taylor_column(&self, count: usize) -> CMatrix {
        let k = self.theta0.ncols();
        let mut out = zeros(count * self.p, k);
        for (s, b) in self.taylor_blocks(count).iter().enumerate() {
            out.view_mut((s * self.p, 0), (self.p, k)).copy_from(b);
        }
        out
    }

    /// `||Θ(z)^* Θ(z) - I||`.
    pub fn inner_defect(&self, z: Complex64) -> f64 {
        let t = self.at(z);
        matrix::norm2(&(t.adjoint() * &t - eye(t.ncols())))
    }
}

/// Samples of the coefficient functions from the operator formulas.
pub struct UpsilonOracle {
    pub p: usize,
    pub m: usize,
    pub q: usize,
    pub k: usize,
    u11_const: CMatrix,
    u12_const: CMatrix,
    g_row: CMatrix,
    k_row: CMatrix,
    rd_n: CMatrix,
    shifted_rd_k: CMatrix,
    pub delta0_sq: CMatrix,
    pub delta1_sq: CMatrix,
    pub delta0: CMatrix,
    pub delta1: CMatrix,
}

impl UpsilonOracle {
    /// `Υ(z)` as a `(p + q) x (k + q)` matrix.
    pub fn at(&self, z: Complex64) -> CMatrix {
        let (p, q, k, m) = (self.p, self.q, self.k, self.m);
        let g_n = row_resolvent_apply(&self.g_row, m, z, &self.rd_n);
        let k_n = row_resolvent_apply(&self.k_row, m, z, &self.rd_n);
        let g_k = row_resolvent_apply(&self.g_row, m, z, &self.shifted_rd_k);
        let k_k = row_resolvent_apply(&self.k_row, m, z, &self.shifted_rd_k);
        let mut out = zeros(p + q, k + q);
        out.view_mut((0, 0), (p, k)).copy_from(&(&self.u11_const - g_n * z));
        out.view_mut((p, 0), (q, k)).copy_from(&(-k_n * z));
        out.view_mut((0, k), (p, q)).copy_from(&(&self.u12_const + g_k * z));
        out.view_mut((p, k), (q, q)).copy_from(&(&self.delta0 + k_k * z));
        out
    }
}

/// Redheffer coefficients and the `U`, `V` functions of the commutant lifting
/// construction, on the truncation.
pub struct AppendixOracle {
    p: usize,
    q: usize,
    k: usize,
    big_m: CMatrix,
    b_nabla: CMatrix,
    h: CMatrix,
    m_eq: CMatrix,
    lambda_eq: CMatrix,
    lambda_d_inv_eq: CMatrix,
    d_inv_eq: CMatrix,
    pub theta: ThetaOracle,
    pub delta0: CMatrix,
    delta0_inv: CMatrix,
    pub delta1: CMatrix,
    delta1_inv: CMatrix,
    pub delta0_sq: CMatrix,
    pub delta1_sq: CMatrix,
}

/// `[Φ11, Φ12, Φ21, Φ22]` at one point.
pub type PhiSample = [CMatrix; 4];

impl AppendixOracle {
    pub fn phi_at(&self, z: Complex64) -> Result<PhiSample> {
        let (q, k) = (self.q, self.k);
        let dim = self.big_m.nrows();
        let resolvent = eye(dim) - &self.big_m * z;
        let mut rhs = zeros(dim, k + 2 * q);
        rhs.columns_mut(0, k).copy_from(&self.b_nabla);
        rhs.view_mut((0, k), (q, q)).copy_from(&eye(q));
        rhs.columns_mut(k + q, q).copy_from(&self.m_eq);
        let sol = matrix::solve(&resolvent, &rhs)
            .map_err(|_| Error::Evaluation(format!("I - z M is singular at z = {z}")))?;
        let (x_b, x_e, x_m) = (sol.columns(0, k), sol.columns(k, q), sol.columns(k + q, q));
        let theta = self.theta.at(z);

        let phi11 = -(&self.delta0_inv * x_b.rows(0, q) * &self.delta1_inv) * z;
        let phi12 = &self.delta0_inv * x_e.rows(0, q);
        let phi21 = &theta * &self.delta1 - &theta * &self.h * x_b * &self.delta1_inv;
        let phi22 = block_series(&self.lambda_eq, self.p, z) + &theta * &self.h * x_m;
        Ok([phi11, phi12, phi21, phi22])
    }

    /// `U(z) = E_p^* (I - z S_p^*)^{-1} Λ (I - Λ^*Λ)^{-1} E_q`.
    pub fn u_at(&self, z: Complex64) -> CMatrix {
        block_series(&self.lambda_d_inv_eq, self.p, z)
    }

    /// `V(z) = E_q^* (I - z S_q^*)^{-1} (I - Λ^*Λ)^{-1} E_q`.
    pub fn v_at(&self, z: Complex64) -> CMatrix {
        block_series(&self.d_inv_eq, self.q, z)
    }

    /// Redheffer map at `z` for a parameter value `y`.
    pub fn redheffer_at(&self, z: Complex64, y: &CMatrix) -> Result<CMatrix> {
        let [f11, f12, f21, f22] = self.phi_at(z)?;
        let inner = eye(f11.nrows()) - &f11 * y;
        let w = matrix::solve(&inner, &f12)?;
        Ok(f22 + f21 * y * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorConfig, InstanceKind};
    use crate::leech::{solve, SolverOptions};
    use crate::matrix::real;
    use crate::realization::circle_points;
    use crate::verify::interior_points;

    fn static_row(k: f64, q: usize) -> LeechData {
        let d2 = if q == 0 { zeros(1, 0) } else { real(1, 1, &[k]) };
        LeechData::new(zeros(0, 0), zeros(0, 2), zeros(0, q), zeros(1, 0), real(1, 2, &[1.0, 0.0]), d2).unwrap()
    }

    #[test]
    fn truncate_examples() {
        let f = Realization::new(real(1, 1, &[0.5]), real(1, 1, &[1.0]), real(1, 1, &[1.0]), real(1, 1, &[0.0])).unwrap();
        let t = truncate(&f, 3).unwrap();
        let blocks: Vec<f64> = t.blocks.iter().map(|b| b[(0, 0)].re).collect();
        assert_eq!(blocks, vec![0.0, 1.0, 0.5]);
        assert_eq!(t.matrix()[(2, 0)].re, 0.5);
        assert_eq!(t.matrix()[(0, 2)].re, 0.0);
        assert!(t.tail_bound >= 0.25 - 1e-12);

        let d = real(2, 1, &[1.0, 2.0]);
        let t = truncate(&Realization::constant(d.clone()), 4).unwrap();
        let mut expected = zeros(8, 4);
        for j in 0..4 {
            expected.view_mut((2 * j, j), (2, 1)).copy_from(&d);
        }
        assert_eq!(t.matrix(), expected);
        assert_eq!(truncate(&Realization::constant(d.clone()), 1).unwrap().matrix(), d);

        let unstable = Realization::new(real(1, 1, &[1.0]), real(1, 1, &[1.0]), real(1, 1, &[1.0]), real(1, 1, &[0.0])).unwrap();
        assert!(matches!(truncate(&unstable, 3), Err(Error::Unstable(_))));
    }

    #[test]
    fn margin_examples() {
        for n in [1, 5, 20] {
            let t = TruncatedLeech::new(&static_row(0.0, 1), n).unwrap();
            assert!((t.positivity_margin().unwrap() - 1.0).abs() < 1e-14);
        }
        let inst = generate(&GeneratorConfig::new(3, 1, 3, 1, InstanceKind::ZeroK), 31).unwrap();
        let g = truncate(&inst.data.g(), 40).unwrap();
        assert!(positivity_margin(&g, &g.clone()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lambda_examples() {
        let t = TruncatedLeech::new(&static_row(0.0, 1), 10).unwrap();
        assert_eq!(matrix::norm2(&t.lambda()), 0.0);
        let t = TruncatedLeech::new(&static_row(0.5, 1), 10).unwrap();
        assert!((matrix::norm2(&t.lambda()) - 0.5).abs() < 1e-14);

        let inst = generate(&GeneratorConfig::new(3, 1, 3, 1, InstanceKind::Feasible), 32).unwrap();
        let t = TruncatedLeech::new(&inst.data, 200).unwrap();
        assert!(t.positivity_margin().unwrap() > 0.0);
        assert!(solve(&inst.data, &SolverOptions::default()).is_ok());
        assert!(matrix::norm2(&t.lambda()) < 1.0);
    }

    #[test]
    fn theta_of_static_row() {
        let t = TruncatedLeech::new(&static_row(0.0, 0), 8).unwrap();
        let theta0 = real(2, 1, &[0.0, 1.0]);
        let theta = t.theta(&theta0);
        let expected = real(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        for z in circle_points(8) {
            let th = theta.at(z);
            assert!((&th * th.adjoint() - &expected).norm() < 1e-14);
        }

        let square = LeechData::new(zeros(0, 0), zeros(0, 1), zeros(0, 0), zeros(1, 0), eye(1), zeros(1, 0)).unwrap();
        let t = TruncatedLeech::new(&square, 4).unwrap();
        assert_eq!(t.theta(&zeros(1, 0)).at(Complex64::new(0.5, 0.0)).shape(), (1, 0));
    }

    #[test]
    fn theta_is_inner() {
        let inst = generate(&GeneratorConfig::new(3, 1, 3, 1, InstanceKind::Feasible), 33).unwrap();
        let d = solve(&inst.data, &SolverOptions::default()).unwrap();
        let theta = TruncatedLeech::new(&inst.data, 300).unwrap().theta(&d.theta0);
        for z in circle_points(32) {
            assert!(theta.inner_defect(z) < 1e-5);
        }
    }

    #[test]
    fn zero_k_upsilon_and_phi() {
        let inst = generate(&GeneratorConfig::new(3, 1, 3, 2, InstanceKind::ZeroK), 34).unwrap();
        let d = solve(&inst.data, &SolverOptions::default()).unwrap();
        let t = TruncatedLeech::new(&inst.data, 60).unwrap();
        let u = t.upsilon(&d.theta0).unwrap();
        let appendix = t.appendix(&d.theta0).unwrap();
        for z in interior_points(8) {
            let v = u.at(z);
            assert!(v.view((0, 2), (3, 2)).norm() < 1e-12);
            assert!(v.view((3, 0), (2, 2)).norm() < 1e-12);
            assert!((v.view((3, 2), (2, 2)) - eye(2)).norm() < 1e-12);
            assert!(appendix.phi_at(z).unwrap()[0].norm() < 1e-12);
        }
    }

    #[test]
    fn upsilon_at_origin_and_det_v() {
        let inst = generate(&GeneratorConfig::new(3, 1, 3, 2, InstanceKind::Feasible), 35).unwrap();
        let d = solve(&inst.data, &SolverOptions::default()).unwrap();
        let t = TruncatedLeech::new(&inst.data, 100).unwrap();
        let u = t.upsilon(&d.theta0).unwrap();
        let at0 = u.at(Complex64::new(0.0, 0.0));
        assert!((at0.view((3, 2), (2, 2)) - &u.delta0).norm() < 1e-14);
        let appendix = t.appendix(&d.theta0).unwrap();
        for z in interior_points(16) {
            assert!(appendix.v_at(z).determinant().norm() > 1e-3);
        }
    }
}
