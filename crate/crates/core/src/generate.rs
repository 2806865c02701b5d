//! Random desk-scale problem instances with controlled solvability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::leech::{self, LeechData};
use crate::matrix::{self, c64, eye, zeros, CMatrix};
use crate::oracle::TruncatedLeech;
use crate::riccati::scaled;

/// Entries with independent real and imaginary parts uniform in `[-1/2, 1/2]`.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    random_matrix(rng, n, n).qr().q()
}

/// `U T U^*` with `T` upper triangular, diagonal moduli drawn from `radius`.
pub fn random_stable(rng: &mut impl Rng, n: usize, radius: (f64, f64)) -> CMatrix {
    let mut t = zeros(n, n);
    for i in 0..n {
        let r = radius.0 + (radius.1 - radius.0) * rng.gen::<f64>();
        t[(i, i)] = num_complex::Complex64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>());
        for j in i + 1..n {
            t[(i, j)] = c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.3;
        }
    }
    let u = random_unitary(rng, n);
    &u * t * u.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// `K` scaled to a fraction of the critical size.
    Feasible,
    /// `K` scaled beyond the critical size.
    Infeasible,
    /// `K = 0`.
    ZeroK,
    /// `K = I_m`, with `G` scaled instead.
    Corona,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Feasible => "feasible",
            InstanceKind::Infeasible => "infeasible",
            InstanceKind::ZeroK => "zero-k",
            InstanceKind::Corona => "corona",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [InstanceKind::Feasible, InstanceKind::Infeasible, InstanceKind::ZeroK, InstanceKind::Corona]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub kind: InstanceKind,
    /// Range of eigenvalue moduli of `A`.
    pub radius: (f64, f64),
    /// Size of `K` relative to the critical size; ignored for `K = 0`.
    pub k_ratio: f64,
    /// Truncation depth used to estimate the critical size.
    pub critical_blocks: usize,
}

impl GeneratorConfig {
    pub fn new(n: usize, m: usize, p: usize, q: usize, kind: InstanceKind) -> Self {
        let k_ratio = match kind {
            InstanceKind::Infeasible => 2.0,
            _ => 0.5,
        };
        GeneratorConfig { n, m, p, q, kind, radius: (0.8, 0.9), k_ratio, critical_blocks: 120 }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub data: LeechData,
    pub seed: u64,
    pub kind: InstanceKind,
    /// Critical size of the unscaled `K` (or `1 / size` of `G` for corona data).
    pub critical_scale: f64,
    /// Factor applied to `K` (or to `G` for corona data).
    pub applied_scale: f64,
}

/// Largest `c` with the truncated `T_G T_G^* - c^2 T_K T_K^*` positive
/// semidefinite; it decreases with the truncation depth.
pub fn critical_scale(data: &LeechData, n_blocks: usize) -> Result<f64> {
    let t = TruncatedLeech::new(data, n_blocks)?;
    let l = t
        .gram()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("truncated T_G T_G^* is not positive definite".into()))?;
    let lk = l.l().solve_lower_triangular(t.tk_matrix()).ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
    let norm = matrix::norm2(&lk);
    Ok(if norm == 0.0 { f64::INFINITY } else { 1.0 / norm })
}

pub fn generate(cfg: &GeneratorConfig, seed: u64) -> Result<Instance> {
    let GeneratorConfig { n, m, p, q, kind, .. } = *cfg;
    if p < m || p > n + m {
        return Err(Error::Dimension(format!("need m <= p <= n + m, got n = {n}, m = {m}, p = {p}")));
    }
    if kind == InstanceKind::Corona && q != m {
        return Err(Error::Dimension(format!("corona data needs q = m, got q = {q}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..32 {
        let a = random_stable(&mut rng, n, cfg.radius);
        let c = random_matrix(&mut rng, m, n);
        let b1 = random_matrix(&mut rng, n, p);
        let d1 = random_matrix(&mut rng, m, p);
        let (b2, d2) = match kind {
            InstanceKind::ZeroK => (zeros(n, q), zeros(m, q)),
            InstanceKind::Corona => (zeros(n, q), eye(m)),
            _ => (random_matrix(&mut rng, n, q), random_matrix(&mut rng, m, q)),
        };
        let data = LeechData::new(a, b1, b2, c, d1, d2)?;
        if !leech::validate(&data, matrix::DEFAULT_TOL).passed()
            || leech::validate(&data, matrix::DEFAULT_TOL).observability_ratio < 1e-4
        {
            continue;
        }
        let (critical_scale, applied_scale, data) = match kind {
            InstanceKind::ZeroK => (f64::INFINITY, 1.0, data),
            InstanceKind::Corona => {
                let c = critical_scale(&data, cfg.critical_blocks)?;
                let s = 1.0 / (cfg.k_ratio * c);
                let scaled_g = LeechData { b1: scaled(&data.b1, s), d1: scaled(&data.d1, s), ..data };
                (c, s, scaled_g)
            }
            _ => {
                let c = critical_scale(&data, cfg.critical_blocks)?;
                let s = cfg.k_ratio * c;
                (c, s, data.with_k_scaled(s))
            }
        };
        return Ok(Instance { data, seed, kind, critical_scale, applied_scale });
    }
    Err(Error::InvalidData(format!("no valid instance found for seed {seed}")))
}
