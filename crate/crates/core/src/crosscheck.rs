//! Comparison of the state-space construction with the truncated operator
//! formulas: a convergence ladder over truncation depths and a suite of
//! operator identities checked on the truncation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{CoefficientSet, RedhefferCoefficients};
use crate::error::Result;
use crate::generate::random_matrix;
use crate::leech::{DerivedMatrices, LeechData};
use crate::matrix::{self, eye, hermitian_part, zeros, CMatrix};
use crate::oracle::{self, TruncatedLeech};
use crate::realization;
use crate::verify;

pub const DEFAULT_LADDER: [usize; 3] = [50, 100, 200];

/// Tolerance for identities that hold only up to truncation error.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// Largest norm of the difference between two samples of `Υ`, per block.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockDifferences {
    pub u11: f64,
    pub u12: f64,
    pub u21: f64,
    pub u22: f64,
}

impl BlockDifferences {
    pub fn max(&self) -> f64 {
        self.u11.max(self.u12).max(self.u21).max(self.u22)
    }

    fn absorb(&mut self, diff: &CMatrix, p: usize, q: usize, k: usize) {
        let part = |r: usize, nr: usize, c: usize, nc: usize| matrix::norm2(&diff.view((r, c), (nr, nc)).into_owned());
        self.u11 = self.u11.max(part(0, p, 0, k));
        self.u12 = self.u12.max(part(0, p, k, q));
        self.u21 = self.u21.max(part(p, q, 0, k));
        self.u22 = self.u22.max(part(p, q, k, q));
    }
}

/// One rung of the convergence ladder.
#[derive(Debug, Clone)]
pub struct LadderRow {
    pub n_blocks: usize,
    pub positivity_margin: f64,
    /// `None` when the truncation is not positive and the comparison is skipped.
    pub comparison: Option<LadderComparison>,
}

#[derive(Debug, Clone)]
pub struct LadderComparison {
    pub upsilon: BlockDifferences,
    pub delta0: f64,
    pub delta1: f64,
    pub gram_defect: f64,
    pub theta_inner: f64,
}

/// Compares `Υ`, `Δ0`, `Δ1` and the Gram defect with their truncated operator
/// counterparts at each depth, sampling `Υ` at `points`.
pub fn ladder(
    data: &LeechData,
    derived: &DerivedMatrices,
    coeffs: &CoefficientSet,
    depths: &[usize],
    points: &[Complex64],
) -> Result<Vec<LadderRow>> {
    let circle = realization::circle_points(32);
    let mut rows = Vec::with_capacity(depths.len());
    for &n in depths {
        let t = TruncatedLeech::new(data, n)?;
        let positivity_margin = t.positivity_margin()?;
        if !t.is_positive() || positivity_margin <= 0.0 {
            rows.push(LadderRow { n_blocks: n, positivity_margin, comparison: None });
            continue;
        }
        let u = t.upsilon(&derived.theta0)?;
        let mut upsilon = BlockDifferences::default();
        for &z in points {
            let diff = coeffs.evaluate(z)? - u.at(z);
            upsilon.absorb(&diff, coeffs.p, coeffs.q, coeffs.k);
        }
        let theta = t.theta(&derived.theta0);
        let theta_inner = circle.iter().map(|&z| theta.inner_defect(z)).fold(0.0, f64::max);
        rows.push(LadderRow {
            n_blocks: n,
            positivity_margin,
            comparison: Some(LadderComparison {
                upsilon,
                delta0: matrix::norm2(&(&derived.delta0 - &u.delta0)),
                delta1: matrix::norm2(&(&derived.delta1 - &u.delta1)),
                gram_defect: matrix::norm2(&(&derived.gram_defect - t.gram_defect())),
                theta_inner,
            }),
        });
    }
    Ok(rows)
}

/// Outcome of one identity check.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub name: &'static str,
    /// Relative residual `||lhs - rhs|| / max(1, ||rhs||)`, maximized over samples.
    pub residual: f64,
    pub tol: f64,
    /// Part of the truncation left out of the comparison.
    pub excluded: &'static str,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.residual <= self.tol
    }
}

fn relative(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    matrix::norm2(&(lhs - rhs)) / matrix::norm2(rhs).max(1.0)
}

/// `[C; C A; ...; C A^{N-1}]`.
pub fn observability_column(c: &CMatrix, a: &CMatrix, n_blocks: usize) -> CMatrix {
    let m = c.nrows();
    let mut out = zeros(n_blocks * m, c.ncols());
    let mut row = c.clone();
    for j in 0..n_blocks {
        out.rows_mut(j * m, m).copy_from(&row);
        row = row * a;
    }
    out
}

/// Truncated Toeplitz matrix of `R = G G^* - K K^*` from its Fourier
/// coefficients `R_0` and `R_j = C A^{j-1} Γ`.
pub fn popov_toeplitz(data: &LeechData, derived: &DerivedMatrices, n_blocks: usize) -> CMatrix {
    let m = data.c.nrows();
    let mut coeffs = vec![derived.popov.r0.clone()];
    let mut ca = data.c.clone();
    for _ in 1..n_blocks {
        coeffs.push(&ca * &derived.popov.gamma);
        ca = ca * &data.a;
    }
    let mut t = zeros(n_blocks * m, n_blocks * m);
    for i in 0..n_blocks {
        for j in 0..n_blocks {
            let block = if i >= j { coeffs[i - j].clone() } else { coeffs[j - i].adjoint() };
            t.view_mut((i * m, j * m), (m, m)).copy_from(&block);
        }
    }
    t
}

fn leading(x: &CMatrix, rows: usize, cols: usize) -> CMatrix {
    x.view((0, 0), (rows, cols)).into_owned()
}

/// Operator identities on a truncation of depth `n_blocks`. Random quadratic
/// forms and the symmetric test matrix are drawn from `seed`.
pub fn identity_suite(
    data: &LeechData,
    derived: &DerivedMatrices,
    coeffs: &CoefficientSet,
    redheffer: &RedhefferCoefficients,
    n_blocks: usize,
    seed: u64,
) -> Result<Vec<IdentityCheck>> {
    let t = TruncatedLeech::new(data, n_blocks)?;
    let dims = data.dims();
    let (m, p, q, nb) = (dims.m, dims.p, dims.q, n_blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = verify::interior_points(8);
    let mut checks = Vec::new();

    let tg = t.tg_matrix();
    let tk = t.tk_matrix();
    let lambda = t.lambda();
    let defect = hermitian_part(&(eye(nb * q) - lambda.adjoint() * &lambda));
    let x = random_matrix(&mut rng, nb * q, 4);
    let rd_tk_x = t.defect_solve(&(tk * &x))?;
    let rhs = &x + tk.adjoint() * &rd_tk_x;
    checks.push(IdentityCheck {
        name: "(I - Λ*Λ)^{-1} = I + T_K* (T_G T_G* - T_K T_K*)^{-1} T_K",
        residual: relative(&(&defect * &rhs), &x),
        tol: 1e-6,
        excluded: "none",
    });
    let lhs = &lambda * matrix::hermitian_solve(&defect, &x)?;
    checks.push(IdentityCheck {
        name: "Λ (I - Λ*Λ)^{-1} = T_G* (T_G T_G* - T_K T_K*)^{-1} T_K",
        residual: relative(&lhs, &(tg.adjoint() * &rd_tk_x)),
        tol: 1e-6,
        excluded: "none",
    });

    let head = (nb - 1) * m;
    let g_col = t.g_column();
    let k_col = t.k_column();
    let shifted = |x: &CMatrix| {
        let down = oracle::shift_down(x, m);
        oracle::shift_down(&down.adjoint(), m).adjoint()
    };
    let rg = t.gram();
    let rk = tk * tk.adjoint();
    checks.push(IdentityCheck {
        name: "T_G E_p E_p* T_G* = T_G T_G* - S T_G T_G* S*",
        residual: relative(&leading(&(&g_col * g_col.adjoint()), head, head), &leading(&(rg - shifted(rg)), head, head)),
        tol: 1e-10,
        excluded: "last block row and column",
    });
    checks.push(IdentityCheck {
        name: "T_K E_q E_q* T_K* = T_K T_K* - S T_K T_K* S*",
        residual: relative(&leading(&(&k_col * k_col.adjoint()), head, head), &leading(&(&rk - shifted(&rk)), head, head)),
        tol: 1e-10,
        excluded: "last block row and column",
    });

    let e_row = eye(nb * m).rows(0, m).into_owned();
    let half = nb / 2;
    let mut masked = rg.clone();
    masked.columns_mut(half * m, (nb - half) * m).fill(Complex64::new(0.0, 0.0));
    masked.rows_mut(half * m, (nb - half) * m).fill(Complex64::new(0.0, 0.0));
    let mut shift_res = 0.0_f64;
    let mut sandwich_res = 0.0_f64;
    let mut kernel_res = 0.0_f64;
    let rd = t.defect_gram();
    for &z in &points {
        let r = oracle::row_resolvent(&e_row, m, z);
        let lhs = oracle::shift_up(&r.adjoint(), m).adjoint();
        shift_res = shift_res.max(relative(&leading(&lhs, m, head), &leading(&(&r * z), m, head)));

        let inner = &masked - shifted(&masked);
        let lhs = oracle::row_resolvent(&(&r * inner), m, z);
        sandwich_res = sandwich_res.max(relative(&lhs, &(&r * &masked)));

        // G(z) A(z) - K(z) B(z) against E* (I - z S*)^{-1} (T_G T_G* - T_K T_K*)
        let ga = data.g().evaluate(z)? * oracle::row_resolvent(&g_col.adjoint(), m, z);
        let kb = data.k().evaluate(z)? * oracle::row_resolvent(&k_col.adjoint(), m, z);
        let cols = half * m;
        kernel_res = kernel_res.max(relative(&leading(&(ga - kb), m, cols), &leading(&(&r * rd), m, cols)));
    }
    checks.push(IdentityCheck {
        name: "E* (I - z S*)^{-1} S = z E* (I - z S*)^{-1}",
        residual: shift_res,
        tol: 1e-12,
        excluded: "last block column",
    });
    checks.push(IdentityCheck {
        name: "E* (I - z S*)^{-1} (X - S X S*) (I - z S*)^{-1} = E* (I - z S*)^{-1} X",
        residual: sandwich_res,
        tol: 1e-10,
        excluded: "X supported on the leading half of the blocks",
    });
    checks.push(IdentityCheck {
        name: "G(z) A(z) - K(z) B(z) = E* (I - z S*)^{-1} (T_G T_G* - T_K T_K*)",
        residual: kernel_res,
        tol: TRUNCATION_TOL,
        excluded: "trailing half of the block columns",
    });

    if p > m {
        let theta = t.theta(&derived.theta0);
        let n_op = t.n_operator(&derived.theta0);
        let rg_n = t.gram_solve(&n_op);
        let w = t.gram_solve(tg).adjoint();
        let mut res = 0.0_f64;
        let cols = half * m;
        for &z in &points {
            let lhs = theta.at(z) * rg_n.adjoint();
            let row = oracle::block_series(&w, p, z);
            // (I - z S*) S = S - z I away from the last block
            let rhs = oracle::shift_up(&row.adjoint(), m).adjoint() - &row * z;
            res = res.max(relative(&leading(&lhs, p, cols), &leading(&rhs, p, cols)));
        }
        checks.push(IdentityCheck {
            name: "Θ(z) N* (T_G T_G*)^{-1} = E_p* (I - z S_p*)^{-1} T_G* (T_G T_G*)^{-1} (I - z S*) S",
            residual: res,
            tol: TRUNCATION_TOL,
            excluded: "trailing half of the block columns",
        });
    }

    let appendix = t.appendix(&derived.theta0)?;
    let mut a19 = 0.0_f64;
    let mut min_det = f64::INFINITY;
    let mut lft_res = 0.0_f64;
    let k = coeffs.k;
    let params = [zeros(k, q), random_matrix(&mut rng, k, q)];
    let params: Vec<CMatrix> = params
        .into_iter()
        .map(|y| {
            let n = matrix::norm2(&y);
            if n > 0.0 {
                y * Complex64::new(0.9 / n, 0.0)
            } else {
                y
            }
        })
        .collect();
    for &z in &points {
        let [_, f12, _, f22] = appendix.phi_at(z)?;
        let v = appendix.v_at(z);
        let u = appendix.u_at(z);
        let v_inv = matrix::inverse(&v)?;
        a19 = a19.max(relative(&f12, &(&appendix.delta0 * &v_inv)));
        a19 = a19.max(relative(&f22, &(u * &v_inv)));
        min_det = min_det.min(v.determinant().norm());
        for y in &params {
            lft_res = lft_res.max(relative(&appendix.redheffer_at(z, y)?, &coeffs.lft_at(z, y)?));
            lft_res = lft_res.max(relative(&redheffer.evaluate(z, y)?, &coeffs.lft_at(z, y)?));
        }
    }
    checks.push(IdentityCheck {
        name: "Φ12 = Δ0 V^{-1}, Φ22 = U V^{-1}",
        residual: a19,
        tol: TRUNCATION_TOL,
        excluded: "none",
    });
    checks.push(IdentityCheck {
        name: "det V(z) != 0 in the disc (reciprocal of the smallest |det V|)",
        residual: if min_det > 0.0 { 1.0 / min_det } else { f64::INFINITY },
        tol: 1e12,
        excluded: "none",
    });
    checks.push(IdentityCheck {
        name: "Redheffer form (operator and state space) = linear fractional form",
        residual: lft_res,
        tol: TRUNCATION_TOL,
        excluded: "none",
    });

    // Observability operators of {C, A} and {C0, A0}.
    let w_obs = observability_column(&data.c, &data.a, nb);
    let w0 = observability_column(derived.c0(), derived.a0(), nb);
    checks.push(IdentityCheck {
        name: "E_p* T_G* W0 = C1",
        residual: relative(&(g_col.adjoint() * &w0), &derived.c1),
        tol: TRUNCATION_TOL,
        excluded: "none",
    });
    checks.push(IdentityCheck {
        name: "E_q* T_K* W0 = C2",
        residual: relative(&(k_col.adjoint() * &w0), &derived.c2),
        tol: TRUNCATION_TOL,
        excluded: "none",
    });
    checks.push(IdentityCheck {
        name: "Q = W_obs* W0",
        residual: relative(&(w_obs.adjoint() * &w0), derived.q()),
        tol: TRUNCATION_TOL,
        excluded: "none",
    });
    let t_r = popov_toeplitz(data, derived, nb);
    let quarter = (nb / 4) * m;
    let t_r_inv_w = matrix::hermitian_solve(&t_r, &w_obs)?;
    checks.push(IdentityCheck {
        name: "W0 = T_R^{-1} W_obs",
        residual: relative(&t_r_inv_w.rows(0, quarter).into_owned(), &w0.rows(0, quarter).into_owned()),
        tol: TRUNCATION_TOL,
        excluded: "trailing three quarters of the block rows",
    });
    let lhs = oracle::shift_up(&t.defect_solve(&k_col)?, m);
    let rhs = &w0 * &derived.b0;
    checks.push(IdentityCheck {
        name: "S* (T_G T_G* - T_K T_K*)^{-1} T_K E_q = W0 B0",
        residual: relative(&lhs.rows(0, half * m).into_owned(), &rhs.rows(0, half * m).into_owned()),
        tol: TRUNCATION_TOL,
        excluded: "trailing half of the block rows",
    });
    let rd_inv = t.defect_solve(&eye(nb * m))?;
    let t_r_inv = matrix::hermitian_inverse(&t_r)?;
    let rhs = t_r_inv + &w0 * &derived.omega * w0.adjoint();
    checks.push(IdentityCheck {
        name: "(T_G T_G* - T_K T_K*)^{-1} = T_R^{-1} + W0 Ω W0*",
        residual: relative(&leading(&rd_inv, quarter, quarter), &leading(&rhs, quarter, quarter)),
        tol: TRUNCATION_TOL,
        excluded: "trailing three quarters of the block rows and columns",
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_redheffer, build_upsilon};
    use crate::generate::{generate, GeneratorConfig, InstanceKind};
    use crate::leech::{solve, SolverOptions};

    #[test]
    fn identities_hold_on_feasible_instance() {
        let inst = generate(&GeneratorConfig::new(3, 1, 3, 2, InstanceKind::Feasible), 100).unwrap();
        let derived = solve(&inst.data, &SolverOptions::default()).unwrap();
        let coeffs = build_upsilon(&inst.data, &derived).unwrap();
        let red = build_redheffer(&coeffs).unwrap();
        let checks = identity_suite(&inst.data, &derived, &coeffs, &red, 200, 7).unwrap();
        for c in &checks {
            eprintln!("{:.3e} (tol {:.0e}) {}", c.residual, c.tol, c.name);
        }
        assert!(checks.iter().all(IdentityCheck::passed));
    }
}
