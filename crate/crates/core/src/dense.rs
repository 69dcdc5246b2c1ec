//! Dense LU factorizations for subdomain blocks and the coarsest-level solve.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatMut, Par};

use crate::error::{IbmgError, Result};

/// Pivots smaller than this fraction of the largest pivot mark a singular factor.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Relative size of the pressure-diagonal shift used when a block is singular.
pub const PRESSURE_SHIFT: f64 = 1e-12;

pub type DenseMatrix = Mat<f64>;

/// A dense LU factorization with partial pivoting of the symmetrically
/// equilibrated matrix `S a S`, `S = diag(s)`.
///
/// In bordered mode the factor belongs to `[[A, c], [c^T, 0]]` where `c` is the
/// indicator of a constraint set (the pressure unknowns): solving it returns the
/// solution of `A x = b` with zero mean over the constraint set, after removing
/// the component of `b` outside the range of `A`.
pub struct DenseLu {
    lu: PartialPivLu<f64>,
    scale: Vec<f64>,
    dim: usize,
    bordered: bool,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu")
            .field("dim", &self.dim)
            .field("bordered", &self.bordered)
            .finish()
    }
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let scale = equilibration(a);
        let scaled = Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| scale[i] * a[(i, j)] * scale[j]);
        faer::set_global_parallelism(Par::Seq);
        let lu = PartialPivLu::new(scaled.as_ref());
        check_pivots(&lu)?;
        Ok(Self {
            lu,
            scale,
            dim: a.nrows(),
            bordered: false,
        })
    }

    /// Factors `a` bordered by the indicator of `constraint` (see type docs).
    pub fn factor_bordered(a: &DenseMatrix, constraint: &[usize]) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let scale = equilibration(a);
        let mut big = Mat::<f64>::zeros(n + 1, n + 1);
        for j in 0..n {
            for i in 0..n {
                big[(i, j)] = scale[i] * a[(i, j)] * scale[j];
            }
        }
        // The border is `S c`, normalized so that its largest entry is one.
        let smax = constraint.iter().fold(f64::MIN_POSITIVE, |m, &k| m.max(scale[k]));
        for &k in constraint {
            big[(k, n)] = scale[k] / smax;
            big[(n, k)] = scale[k] / smax;
        }
        faer::set_global_parallelism(Par::Seq);
        let lu = PartialPivLu::new(big.as_ref());
        check_pivots(&lu)?;
        Ok(Self {
            lu,
            scale,
            dim: n,
            bordered: true,
        })
    }

    /// Factors `a`; if it is numerically singular, retries with a diagonal shift of
    /// `PRESSURE_SHIFT * max|a|` on the listed pressure entries.
    pub fn factor_with_pressure_shift(a: &DenseMatrix, pressure: &[usize]) -> Result<Self> {
        match Self::factor(a) {
            Ok(lu) => Ok(lu),
            Err(_) => {
                let shift = PRESSURE_SHIFT * max_abs(a);
                log::warn!("singular subdomain block of size {}; shifting pressure diagonal by {shift:e}", a.nrows());
                let mut shifted = a.clone();
                for &k in pressure {
                    shifted[(k, k)] += shift;
                }
                Self::factor(&shifted)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_bordered(&self) -> bool {
        self.bordered
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.dim);
        for (r, s) in rhs.iter_mut().zip(&self.scale) {
            *r *= s;
        }
        if self.bordered {
            let mut ext = Vec::with_capacity(self.dim + 1);
            ext.extend_from_slice(rhs);
            ext.push(0.0);
            let m = MatMut::from_column_major_slice_mut(&mut ext, self.dim + 1, 1);
            self.lu.solve_in_place(m);
            rhs.copy_from_slice(&ext[..self.dim]);
        } else {
            let m = MatMut::from_column_major_slice_mut(rhs, self.dim, 1);
            self.lu.solve_in_place(m);
        }
        for (r, s) in rhs.iter_mut().zip(&self.scale) {
            *r *= s;
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `s_i = 1 / sqrt(max_j max(|a_ij|, |a_ji|))`, so every entry of `S a S` is at most one.
fn equilibration(a: &DenseMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut m = vec![0.0f64; n];
    for j in 0..n {
        for i in 0..n {
            let v = a[(i, j)].abs();
            m[i] = m[i].max(v);
            m[j] = m[j].max(v);
        }
    }
    m.into_iter().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect()
}

fn check_pivots(lu: &PartialPivLu<f64>) -> Result<()> {
    let u = lu.U();
    let n = u.nrows().min(u.ncols());
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for i in 0..n {
        let d = u[(i, i)].abs();
        if !d.is_finite() {
            return Err(IbmgError::Factorization("non-finite pivot".into()));
        }
        max = max.max(d);
        min = min.min(d);
    }
    if n > 0 && min <= SINGULAR_PIVOT_RATIO * max {
        return Err(IbmgError::Factorization(format!(
            "singular matrix (pivot ratio {:e})",
            min / max
        )));
    }
    Ok(())
}

pub fn max_abs(a: &DenseMatrix) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}
