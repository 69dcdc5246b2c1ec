//! Schur-complement block-factorization smoother.
//!
//! With `L = [[A, G], [-D, 0]]` and `M = D A^{-1} G`,
//!
//! ```text
//! x_u = A^{-1} (r_u - G x_p),   M x_p = r_p + D A^{-1} r_u.
//! ```
//!
//! `A^{-1}` is replaced by a few Chebyshev iterations preconditioned by
//! symmetric Gauss-Seidel on `A`, and `M^{-1}` by Chebyshev iterations on
//! `D A~^{-1} G` preconditioned by symmetric Gauss-Seidel on the sparse
//! approximation `M^ = D diag(A)^{-1} G`.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseLu;
use crate::error::Result;
use crate::grid::{dot, StaggeredLevel};
use crate::sparse::CsrMatrix;
use crate::system::LevelSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScConfig {
    /// Chebyshev iterations for `A~^{-1}`.
    pub cheby_iters_a: usize,
    /// Chebyshev iterations for `M~^{-1}`.
    pub cheby_iters_m: usize,
    /// Power iterations used to estimate the largest eigenvalue.
    pub power_iters: usize,
    /// Chebyshev interval `[lower * lambda, upper * lambda]`.
    pub lower: f64,
    pub upper: f64,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self {
            cheby_iters_a: 2,
            cheby_iters_m: 2,
            power_iters: 10,
            lower: 0.1,
            upper: 1.1,
        }
    }
}

/// Symmetric Gauss-Seidel (forward then backward) on a subset of rows,
/// starting from zero: `x = SGS(mat)^{-1} r`.
fn sgs(mat: &CsrMatrix, diag: &[f64], rows: &[usize], r: &[f64], x: &mut [f64]) {
    for &i in rows {
        x[i] = 0.0;
    }
    let sweep = |i: usize, x: &mut [f64]| {
        let (cols, vals) = mat.row(i);
        let mut s = r[i];
        for (&c, v) in cols.iter().zip(vals) {
            if c != i {
                s -= v * x[c];
            }
        }
        x[i] = s / diag[i];
    };
    for &i in rows {
        sweep(i, x);
    }
    for &i in rows.iter().rev() {
        sweep(i, x);
    }
}

/// Chebyshev spectral interval for a preconditioned operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `k` Chebyshev iterations for `op x = b` from `x = 0`, preconditioned by `prec`.
/// Only entries listed in `rows` are touched.
fn chebyshev(
    bounds: ChebyshevBounds,
    k: usize,
    rows: &[usize],
    b: &[f64],
    x: &mut [f64],
    mut op: impl FnMut(&[f64], &mut [f64]),
    mut prec: impl FnMut(&[f64], &mut [f64]),
) {
    let theta = 0.5 * (bounds.upper + bounds.lower);
    let delta = 0.5 * (bounds.upper - bounds.lower);
    let sigma = theta / delta;
    let mut rho = 1.0 / sigma;
    let len = b.len();
    let mut r = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut d = vec![0.0; len];
    let mut ad = vec![0.0; len];
    for &i in rows {
        x[i] = 0.0;
        r[i] = b[i];
    }
    prec(&r, &mut z);
    for &i in rows {
        d[i] = z[i] / theta;
    }
    for it in 0..k {
        for &i in rows {
            x[i] += d[i];
        }
        if it + 1 == k {
            break;
        }
        op(&d, &mut ad);
        for &i in rows {
            r[i] -= ad[i];
        }
        prec(&r, &mut z);
        let rho_next = 1.0 / (2.0 * sigma - rho);
        for &i in rows {
            d[i] = rho_next * rho * d[i] + 2.0 * rho_next / delta * z[i];
        }
        rho = rho_next;
    }
}

fn project_mean(rows: &[usize], v: &mut [f64]) {
    let mean = rows.iter().map(|&i| v[i]).sum::<f64>() / rows.len() as f64;
    for &i in rows {
        v[i] -= mean;
    }
}

/// Largest eigenvalue magnitude of `prec^{-1} op` by the power method.
fn estimate_bounds(
    cfg: &ScConfig,
    rows: &[usize],
    len: usize,
    seed: u64,
    project: bool,
    mut op: impl FnMut(&[f64], &mut [f64]),
    mut prec: impl FnMut(&[f64], &mut [f64]),
) -> ChebyshevBounds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; len];
    for &i in rows {
        x[i] = rng.random_range(-1.0..1.0);
    }
    let mut y = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut lambda = f64::NAN;
    for _ in 0..cfg.power_iters {
        if project {
            project_mean(rows, &mut x);
        }
        let nx = dot(&x, &x).sqrt();
        if !(nx > 0.0) {
            lambda = f64::NAN;
            break;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        op(&x, &mut y);
        prec(&y, &mut z);
        if project {
            project_mean(rows, &mut z);
        }
        lambda = dot(&z, &z).sqrt();
        std::mem::swap(&mut x, &mut z);
    }
    if lambda.is_finite() && lambda > 0.0 {
        ChebyshevBounds {
            lower: cfg.lower * lambda,
            upper: cfg.upper * lambda,
        }
    } else {
        log::warn!("eigenvalue estimate failed; using the fallback Chebyshev interval");
        ChebyshevBounds {
            lower: cfg.lower,
            upper: cfg.upper,
        }
    }
}

#[derive(Debug)]
struct ExactInverses {
    a: DenseLu,
    m: DenseLu,
}

/// Per-level data of the Schur-complement smoother.
#[derive(Debug)]
pub struct SchurSmoother {
    level: StaggeredLevel,
    cfg: ScConfig,
    vel_rows: Vec<usize>,
    p_rows: Vec<usize>,
    a_diag: Vec<f64>,
    m_hat: CsrMatrix,
    m_diag: Vec<f64>,
    a_bounds: ChebyshevBounds,
    m_bounds: ChebyshevBounds,
    exact: Option<ExactInverses>,
}

impl SchurSmoother {
    pub fn new(sys: &LevelSystem, cfg: ScConfig) -> Result<Self> {
        let level = *sys.level();
        let len = level.len();
        let vel_rows: Vec<usize> = (0..level.p_offset()).filter(|&k| !level.is_boundary(k)).collect();
        let p_rows: Vec<usize> = (level.p_offset()..len).collect();
        let a_ib = sys.a_ib();
        let a_diag = a_ib.diagonal();
        let inv: Vec<f64> = a_diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 0.0 }).collect();
        let m_hat = sys.d().matmul(&sys.g().scale_rows(&inv));
        let m_diag = m_hat.diagonal();

        let mut s = Self {
            level,
            cfg,
            vel_rows,
            p_rows,
            a_diag,
            m_hat,
            m_diag,
            a_bounds: ChebyshevBounds { lower: cfg.lower, upper: cfg.upper },
            m_bounds: ChebyshevBounds { lower: cfg.lower, upper: cfg.upper },
            exact: None,
        };
        s.a_bounds = estimate_bounds(
            &cfg,
            &s.vel_rows,
            len,
            0x5eed_a,
            false,
            |x, y| a_ib.mul_vec_into(x, y),
            |r, z| sgs(a_ib, &s.a_diag, &s.vel_rows, r, z),
        );
        let m_bounds = estimate_bounds(
            &cfg,
            &s.p_rows,
            len,
            0x5eed_b,
            true,
            |x, y| s.apply_schur(sys, x, y),
            |r, z| s.m_hat_sgs(r, z),
        );
        s.m_bounds = m_bounds;
        Ok(s)
    }

    /// Same factorization with exact dense inverses of `A` and `M` (small grids only).
    pub fn exact(sys: &LevelSystem) -> Result<Self> {
        let mut s = Self::new(sys, ScConfig::default())?;
        let nv = s.vel_rows.len();
        let np = s.p_rows.len();
        let a_ib = sys.a_ib();
        let mut vpos = vec![usize::MAX; s.level.len()];
        for (k, &g) in s.vel_rows.iter().enumerate() {
            vpos[g] = k;
        }
        let mut a = Mat::<f64>::zeros(nv, nv);
        for (k, &g) in s.vel_rows.iter().enumerate() {
            let (cols, vals) = a_ib.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if vpos[c] != usize::MAX {
                    a[(k, vpos[c])] = v;
                }
            }
        }
        let a_lu = DenseLu::factor(&a)?;
        let g = sys.g();
        let d = sys.d();
        let mut m = Mat::<f64>::zeros(np, np);
        let mut col = vec![0.0; s.level.len()];
        let mut ep = vec![0.0; s.level.len()];
        for (kc, &pc) in s.p_rows.iter().enumerate() {
            ep[pc] = 1.0;
            g.mul_vec_into(&ep, &mut col);
            ep[pc] = 0.0;
            let mut rhs: Vec<f64> = s.vel_rows.iter().map(|&v| col[v]).collect();
            a_lu.solve_in_place(&mut rhs);
            col.iter_mut().for_each(|v| *v = 0.0);
            for (k, &v) in s.vel_rows.iter().enumerate() {
                col[v] = rhs[k];
            }
            let dm = d.mul_vec(&col);
            for (kr, &pr) in s.p_rows.iter().enumerate() {
                m[(kr, kc)] = dm[pr];
            }
        }
        let all: Vec<usize> = (0..np).collect();
        let m_lu = DenseLu::factor_bordered(&m, &all)?;
        s.exact = Some(ExactInverses { a: a_lu, m: m_lu });
        Ok(s)
    }

    pub fn level(&self) -> &StaggeredLevel {
        &self.level
    }

    /// Sparse approximate Schur complement `D diag(A_IB)^{-1} G`.
    pub fn m_hat(&self) -> &CsrMatrix {
        &self.m_hat
    }

    pub fn bounds(&self) -> (ChebyshevBounds, ChebyshevBounds) {
        (self.a_bounds, self.m_bounds)
    }

    fn m_hat_sgs(&self, r: &[f64], z: &mut [f64]) {
        let mut rr = r.to_vec();
        project_mean(&self.p_rows, &mut rr);
        sgs(&self.m_hat, &self.m_diag, &self.p_rows, &rr, z);
        project_mean(&self.p_rows, z);
    }

    /// `x = A~^{-1} b` on velocity unknowns.
    fn a_inv(&self, sys: &LevelSystem, b: &[f64], x: &mut [f64]) {
        if let Some(ex) = &self.exact {
            let mut v: Vec<f64> = self.vel_rows.iter().map(|&i| b[i]).collect();
            ex.a.solve_in_place(&mut v);
            for (k, &i) in self.vel_rows.iter().enumerate() {
                x[i] = v[k];
            }
            return;
        }
        let a_ib = sys.a_ib();
        chebyshev(
            self.a_bounds,
            self.cfg.cheby_iters_a,
            &self.vel_rows,
            b,
            x,
            |v, out| a_ib.mul_vec_into(v, out),
            |r, z| sgs(a_ib, &self.a_diag, &self.vel_rows, r, z),
        );
    }

    /// `y = D A~^{-1} G p` on pressure entries.
    fn apply_schur(&self, sys: &LevelSystem, p: &[f64], y: &mut [f64]) {
        let gp = sys.g().mul_vec(p);
        let mut t = vec![0.0; p.len()];
        self.a_inv(sys, &gp, &mut t);
        sys.d().mul_vec_into(&t, y);
    }

    /// `x = M~^{-1} b` on pressure entries, mean-free.
    fn m_inv(&self, sys: &LevelSystem, b: &[f64], x: &mut [f64]) {
        if let Some(ex) = &self.exact {
            let mut v: Vec<f64> = self.p_rows.iter().map(|&i| b[i]).collect();
            ex.m.solve_in_place(&mut v);
            for (k, &i) in self.p_rows.iter().enumerate() {
                x[i] = v[k];
            }
            return;
        }
        chebyshev(
            self.m_bounds,
            self.cfg.cheby_iters_m,
            &self.p_rows,
            b,
            x,
            |v, out| self.apply_schur(sys, v, out),
            |r, z| self.m_hat_sgs(r, z),
        );
        project_mean(&self.p_rows, x);
    }

    /// One application of the approximate block factorization to `b - L w`.
    pub fn apply(&self, sys: &LevelSystem, w: &mut [f64], b: &[f64]) {
        let len = self.level.len();
        let mut r = b.to_vec();
        sys.residual_into(w, &mut r);
        for i in 0..len {
            if self.level.is_boundary(i) {
                r[i] = 0.0;
            }
        }
        let mut ru = r.clone();
        ru[self.level.p_offset()..].fill(0.0);
        let mut t = vec![0.0; len];
        self.a_inv(sys, &ru, &mut t);

        // y_p = r_p + D t
        let mut y = vec![0.0; len];
        sys.d().mul_vec_into(&t, &mut y);
        for &i in &self.p_rows {
            y[i] += r[i];
        }
        for &i in &self.vel_rows {
            y[i] = 0.0;
        }
        project_mean(&self.p_rows, &mut y);
        let mut zp = vec![0.0; len];
        self.m_inv(sys, &y, &mut zp);

        let gz = sys.g().mul_vec(&zp);
        let mut s = vec![0.0; len];
        self.a_inv(sys, &gz, &mut s);
        for &i in &self.vel_rows {
            w[i] += t[i] - s[i];
        }
        for &i in &self.p_rows {
            w[i] += zp[i];
        }
    }
}
