//! Brute-force dense reference operators for tests.
//!
//! Everything here is rebuilt from pointwise definitions: stencils are applied
//! to unit vectors, kernels are evaluated face by face over the whole grid, and
//! transfers are written as geometric interpolation. Only the flat index layout
//! (`[u1 | u2 | p]`) and the node data of a structure are shared with
//! `ibmg-core`, so agreement between the two is a real check.

use ibmg_core::fiber::Structure;
use ibmg_core::operators::FluidParams;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest matrix dimension the oracle agrees to build or factor.
pub const MAX_DOFS: usize = 4096;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dense system of size {0} exceeds the oracle limit of {MAX_DOFS}")]
    TooLarge(usize),
    #[error("matrix is rank deficient (pivot ratio {0:.3e})")]
    RankDeficient(f64),
    #[error("dense solve left backward error {0:.3e}")]
    Inaccurate(f64),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn guard(dim: usize) -> Result<()> {
    if dim > MAX_DOFS {
        return Err(OracleError::TooLarge(dim));
    }
    Ok(())
}

/// Flat layout of an `n x n` MAC grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn u1(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn u2(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) + j * self.n + i
    }

    pub fn p(&self, i: usize, j: usize) -> usize {
        2 * self.n * (self.n + 1) + j * self.n + i
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n * (self.n + 1)
    }

    pub fn len(&self) -> usize {
        self.n_velocity() + self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Indices of the unknowns, ascending (wall-normal faces excluded).
    pub fn unknowns(&self) -> Vec<usize> {
        let n = self.n;
        let mut keep = vec![true; self.len()];
        for j in 0..n {
            keep[self.u1(0, j)] = false;
            keep[self.u1(n, j)] = false;
        }
        for i in 0..n {
            keep[self.u2(i, 0)] = false;
            keep[self.u2(i, n)] = false;
        }
        (0..self.len()).filter(|&k| keep[k]).collect()
    }

    pub fn pressure_indices(&self) -> Vec<usize> {
        (self.n_velocity()..self.len()).collect()
    }
}

/// Pointwise momentum operator `(rho/dt) u - mu Lap u` with `-u` ghosts behind
/// the walls; boundary faces are neither read nor written.
pub fn momentum_pointwise(grid: Grid, rho: f64, mu: f64, dt: f64, u: &[f64]) -> Vec<f64> {
    let n = grid.n as isize;
    let h2 = grid.h() * grid.h();
    let mut out = vec![0.0; grid.len()];
    let v1 = |i: isize, j: isize, own: f64| -> f64 {
        if j < 0 || j >= n {
            -own
        } else if i <= 0 || i >= n {
            0.0
        } else {
            u[grid.u1(i as usize, j as usize)]
        }
    };
    let v2 = |i: isize, j: isize, own: f64| -> f64 {
        if i < 0 || i >= n {
            -own
        } else if j <= 0 || j >= n {
            0.0
        } else {
            u[grid.u2(i as usize, j as usize)]
        }
    };
    for j in 0..n {
        for i in 1..n {
            let c = u[grid.u1(i as usize, j as usize)];
            let lap = v1(i + 1, j, c) + v1(i - 1, j, c) + v1(i, j + 1, c) + v1(i, j - 1, c) - 4.0 * c;
            out[grid.u1(i as usize, j as usize)] = rho / dt * c - mu * lap / h2;
        }
    }
    for j in 1..n {
        for i in 0..n {
            let c = u[grid.u2(i as usize, j as usize)];
            let lap = v2(i + 1, j, c) + v2(i - 1, j, c) + v2(i, j + 1, c) + v2(i, j - 1, c) - 4.0 * c;
            out[grid.u2(i as usize, j as usize)] = rho / dt * c - mu * lap / h2;
        }
    }
    out
}

/// Pointwise pressure gradient on interior faces.
pub fn gradient_pointwise(grid: Grid, p: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let h = grid.h();
    let mut out = vec![0.0; grid.len()];
    for j in 0..n {
        for i in 1..n {
            out[grid.u1(i, j)] = (p[grid.p(i, j)] - p[grid.p(i - 1, j)]) / h;
        }
    }
    for j in 1..n {
        for i in 0..n {
            out[grid.u2(i, j)] = (p[grid.p(i, j)] - p[grid.p(i, j - 1)]) / h;
        }
    }
    out
}

/// Pointwise cell divergence.
pub fn divergence_pointwise(grid: Grid, u: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let h = grid.h();
    let mut out = vec![0.0; grid.len()];
    for j in 0..n {
        for i in 0..n {
            let flux = u[grid.u1(i + 1, j)] - u[grid.u1(i, j)] + u[grid.u2(i, j + 1)] - u[grid.u2(i, j)];
            out[grid.p(i, j)] = flux / h;
        }
    }
    out
}

/// Matrix of a linear map over the grid's flat space, one unit vector per column.
/// Columns of wall-normal faces are left empty.
fn columns_of(grid: Grid, op: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let len = grid.len();
    let mut m = DMatrix::zeros(len, len);
    let mut e = vec![0.0; len];
    for c in grid.unknowns() {
        e[c] = 1.0;
        let col = op(&e);
        e[c] = 0.0;
        for (r, v) in col.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

pub fn dense_a(grid: Grid, params: &FluidParams) -> Result<DMatrix<f64>> {
    guard(grid.len())?;
    let (rho, mu, dt) = (params.rho, params.mu, params.dt);
    Ok(columns_of(grid, |e| momentum_pointwise(grid, rho, mu, dt, e)))
}

pub fn dense_g(grid: Grid) -> Result<DMatrix<f64>> {
    guard(grid.len())?;
    Ok(columns_of(grid, |e| gradient_pointwise(grid, e)))
}

pub fn dense_d(grid: Grid) -> Result<DMatrix<f64>> {
    guard(grid.len())?;
    Ok(columns_of(grid, |e| divergence_pointwise(grid, e)))
}

/// Peskin's four-point kernel.
pub fn kernel(r: f64) -> f64 {
    let r = r.abs();
    match r {
        r if r < 1.0 => 0.125 * (3.0 - 2.0 * r + (1.0 + 4.0 * r * (1.0 - r)).sqrt()),
        r if r < 2.0 => 0.125 * (5.0 - 2.0 * r - (-7.0 + 4.0 * r * (3.0 - r)).max(0.0).sqrt()),
        _ => 0.0,
    }
}

/// Node data of one fiber mesh; nodes are fiber-major (`m * m1 + l`).
#[derive(Clone, Debug)]
pub struct Fibers {
    pub positions: Vec<[f64; 2]>,
    pub m1: usize,
    pub m2: usize,
    pub ds1: f64,
    pub ds2: f64,
    pub periodic: bool,
    pub alpha: f64,
}

impl Fibers {
    /// Copies the node data of every mesh in `structure`.
    pub fn from_structure(structure: &Structure) -> Vec<Fibers> {
        structure
            .meshes()
            .iter()
            .map(|m| Fibers {
                positions: m.positions().to_vec(),
                m1: m.m1(),
                m2: m.m2(),
                ds1: m.ds1(),
                ds2: m.ds2(),
                periodic: m.periodic_s1(),
                alpha: m.alpha(),
            })
            .collect()
    }
}

fn all_nodes(fibers: &[Fibers]) -> Vec<[f64; 2]> {
    fibers.iter().flat_map(|f| f.positions.iter().copied()).collect()
}

/// Interpolation `J` (`2M x len`): row `k` is the x-component of node `k`,
/// row `M + k` its y-component. Every interior face is visited.
pub fn dense_interpolation(grid: Grid, fibers: &[Fibers]) -> Result<DMatrix<f64>> {
    let nodes = all_nodes(fibers);
    let m = nodes.len();
    guard(grid.len().max(2 * m))?;
    let n = grid.n;
    let h = grid.h();
    let mut j_mat = DMatrix::zeros(2 * m, grid.len());
    for (k, &[x, y]) in nodes.iter().enumerate() {
        for j in 0..n {
            for i in 1..n {
                let (fx, fy) = (i as f64 * h, (j as f64 + 0.5) * h);
                j_mat[(k, grid.u1(i, j))] = kernel((x - fx) / h) * kernel((y - fy) / h);
            }
        }
        for j in 1..n {
            for i in 0..n {
                let (fx, fy) = ((i as f64 + 0.5) * h, j as f64 * h);
                j_mat[(m + k, grid.u2(i, j))] = kernel((x - fx) / h) * kernel((y - fy) / h);
            }
        }
    }
    Ok(j_mat)
}

/// Spreading `S = J^T diag(ds1 ds2) / h^2` (`len x 2M`).
pub fn dense_spreading(grid: Grid, fibers: &[Fibers]) -> Result<DMatrix<f64>> {
    let j = dense_interpolation(grid, fibers)?;
    let h2 = grid.h() * grid.h();
    let w: Vec<f64> = fibers
        .iter()
        .flat_map(|f| std::iter::repeat_n(f.ds1 * f.ds2, f.positions.len()))
        .collect();
    let m = w.len();
    let mut s = j.transpose();
    for c in 0..2 * m {
        s.column_mut(c).scale_mut(w[c % m] / h2);
    }
    Ok(s)
}

/// Fiber stiffness `K` (`2M x 2M`): `alpha (X_{l+1} - 2 X_l + X_{l-1}) / ds1^2`
/// along every fiber, with missing terms at free ends.
pub fn dense_stiffness(fibers: &[Fibers]) -> Result<DMatrix<f64>> {
    let m: usize = fibers.iter().map(|f| f.positions.len()).sum();
    guard(2 * m)?;
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    let mut base = 0;
    for f in fibers {
        let c = f.alpha / (f.ds1 * f.ds1);
        for fiber in 0..f.m2 {
            for l in 0..f.m1 {
                let row = base + fiber * f.m1 + l;
                let mut nbrs = Vec::with_capacity(2);
                if l + 1 < f.m1 {
                    nbrs.push(l + 1);
                } else if f.periodic {
                    nbrs.push(0);
                }
                if l > 0 {
                    nbrs.push(l - 1);
                } else if f.periodic {
                    nbrs.push(f.m1 - 1);
                }
                for nb in nbrs {
                    let col = base + fiber * f.m1 + nb;
                    for d in 0..2 {
                        k[(d * m + row, d * m + col)] += c;
                        k[(d * m + row, d * m + row)] -= c;
                    }
                }
            }
        }
        base += f.positions.len();
    }
    Ok(k)
}

/// Full-space `L_IB = [[A - dt S K J, G], [-D, 0]]`; wall-normal rows and
/// columns are zero.
pub fn dense_lib(grid: Grid, params: &FluidParams, fibers: &[Fibers]) -> Result<DMatrix<f64>> {
    let mut l = dense_a(grid, params)? + dense_g(grid)? - dense_d(grid)?;
    if !fibers.is_empty() {
        let e = dense_spreading(grid, fibers)? * dense_stiffness(fibers)? * dense_interpolation(grid, fibers)?;
        l -= e * params.dt;
    }
    let unknown = unknown_mask(grid);
    for r in 0..grid.len() {
        for c in 0..grid.len() {
            if !unknown[r] || !unknown[c] {
                l[(r, c)] = 0.0;
            }
        }
    }
    Ok(l)
}

fn unknown_mask(grid: Grid) -> Vec<bool> {
    let mut m = vec![false; grid.len()];
    for k in grid.unknowns() {
        m[k] = true;
    }
    m
}

/// The unreduced step matrix over `(u, p)` unknowns followed by the `2M`
/// node coordinates:
/// `[[A, G, -S K], [-D, 0, 0], [-J, 0, I/dt]]`.
pub fn dense_eq10(grid: Grid, params: &FluidParams, fibers: &[Fibers]) -> Result<DMatrix<f64>> {
    let idx = grid.unknowns();
    let nu = idx.len();
    let m2 = 2 * fibers.iter().map(|f| f.positions.len()).sum::<usize>();
    guard(nu + m2)?;
    let fluid = dense_a(grid, params)? + dense_g(grid)? - dense_d(grid)?;
    let mut out = DMatrix::zeros(nu + m2, nu + m2);
    for (r, &gr) in idx.iter().enumerate() {
        for (c, &gc) in idx.iter().enumerate() {
            out[(r, c)] = fluid[(gr, gc)];
        }
    }
    for d in 0..m2 {
        out[(nu + d, nu + d)] = 1.0 / params.dt;
    }
    if m2 > 0 {
        let sk = dense_spreading(grid, fibers)? * dense_stiffness(fibers)?;
        let j = dense_interpolation(grid, fibers)?;
        for (r, &g) in idx.iter().enumerate() {
            for d in 0..m2 {
                out[(r, nu + d)] = -sk[(g, d)];
                out[(nu + d, r)] = -j[(d, g)];
            }
        }
    }
    Ok(out)
}

/// Right side of the unreduced system: `(g, 0, X^n / dt)` restricted to
/// unknowns, with `g = (rho/dt) u^n + 2 mu lid(x) / h^2` on the top row.
pub fn eq10_rhs(grid: Grid, params: &FluidParams, lid_speed: f64, u_n: &[f64], fibers: &[Fibers]) -> DVector<f64> {
    let g = momentum_rhs(grid, params, lid_speed, u_n);
    let idx = grid.unknowns();
    let x = all_nodes(fibers);
    let mut b = DVector::zeros(idx.len() + 2 * x.len());
    for (r, &k) in idx.iter().enumerate() {
        b[r] = g[k];
    }
    for (k, p) in x.iter().enumerate() {
        b[idx.len() + k] = p[0] / params.dt;
        b[idx.len() + x.len() + k] = p[1] / params.dt;
    }
    b
}

/// Fluid part of the step right side over the full flat space.
pub fn momentum_rhs(grid: Grid, params: &FluidParams, lid_speed: f64, u_n: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let h = grid.h();
    let mut g = vec![0.0; grid.len()];
    for j in 0..n {
        for i in 1..n {
            g[grid.u1(i, j)] = params.rho / params.dt * u_n[grid.u1(i, j)];
        }
    }
    for j in 1..n {
        for i in 0..n {
            g[grid.u2(i, j)] = params.rho / params.dt * u_n[grid.u2(i, j)];
        }
    }
    for i in 1..n {
        let x = i as f64 * h;
        let lid = lid_speed * (std::f64::consts::PI * x).sin().powi(2);
        g[grid.u1(i, n - 1)] += 2.0 * params.mu * lid / (h * h);
    }
    g
}

/// `m[rows, cols]`.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// Dense matrix of a sparse production operator.
pub fn from_triplets(rows: usize, cols: usize, t: impl IntoIterator<Item = (usize, usize, f64)>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for (r, c, v) in t {
        m[(r, c)] += v;
    }
    m
}

/// Solves `m x = b` by fully pivoted LU.
///
/// If `mean_free` is non-empty, the matrix may have a one-dimensional null
/// space spanned by the indicator of `mean_free` (the pressure mode). The
/// system is then bordered by that indicator: the returned `x` has zero sum
/// over `mean_free` and solves `m x = b'`, where `b'` is `b` with its component
/// along the indicator removed.
pub fn dense_solve(m: &DMatrix<f64>, b: &DVector<f64>, mean_free: &[usize]) -> Result<DVector<f64>> {
    let n = m.nrows();
    if m.ncols() != n || b.len() != n {
        return Err(OracleError::Shape {
            expected: n,
            found: if m.ncols() != n { m.ncols() } else { b.len() },
        });
    }
    let border = usize::from(!mean_free.is_empty());
    let dim = n + border;
    guard(dim)?;
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (n, n)).copy_from(m);
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(b);
    if border == 1 {
        // Border scaled to the rows it touches so equilibration stays balanced.
        let scale = mean_free
            .iter()
            .map(|&k| m.row(k).amax().max(m.column(k).amax()))
            .fold(0.0_f64, f64::max)
            .max(1.0)
            .sqrt();
        for &k in mean_free {
            a[(k, n)] = scale;
            a[(n, k)] = scale;
        }
    }

    // Symmetric equilibration so mixed-unit blocks do not hide the rank.
    let s: Vec<f64> = (0..dim)
        .map(|i| {
            let mx = a.row(i).amax().max(a.column(i).amax());
            if mx > 0.0 {
                1.0 / mx.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for r in 0..dim {
        for c in 0..dim {
            scaled[(r, c)] *= s[r] * s[c];
        }
    }
    let lu = scaled.full_piv_lu();
    let diag = lu.u().diagonal();
    let big = diag.amax();
    let small = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let ratio = if big > 0.0 { small / big } else { 0.0 };
    if ratio < 1e-15 {
        return Err(OracleError::RankDeficient(ratio));
    }
    let solve = |r: &DVector<f64>| -> Result<DVector<f64>> {
        let sr = DVector::from_fn(dim, |i, _| r[i] * s[i]);
        let y = lu.solve(&sr).ok_or(OracleError::RankDeficient(ratio))?;
        Ok(DVector::from_fn(dim, |i, _| y[i] * s[i]))
    };
    let mut z = solve(&rhs)?;
    // One step of iterative refinement.
    let r = &rhs - &a * &z;
    z += solve(&r)?;

    // Normwise backward error: stiff fiber blocks cancel inside `a z`, so a
    // residual relative to `b` alone is not attainable in floating point.
    let resid = &a * &z - &rhs;
    let a_norm = a.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let denom = a_norm * z.amax() + rhs.amax();
    let relres = if denom > 0.0 { resid.amax() / denom } else { 0.0 };
    if relres > 1e-11 {
        return Err(OracleError::Inaccurate(relres));
    }
    Ok(z.rows(0, n).into_owned())
}

/// Velocity prolongation `P_u` (`fine.len() x coarse.len()`) as linear
/// interpolation along each face normal and constant along the face.
/// Pressure rows and columns are empty.
pub fn dense_prolong_velocity(coarse: Grid) -> Result<DMatrix<f64>> {
    let fine = Grid::new(2 * coarse.n);
    guard(fine.len())?;
    let (nf, hc, hf) = (fine.n, coarse.h(), fine.h());
    let mut p = DMatrix::zeros(fine.len(), coarse.len());
    // Weights of the coarse normal-direction faces around coordinate t.
    let normal = |t: f64| -> Vec<(usize, f64)> {
        let s = t / hc;
        let i0 = s.floor() as usize;
        let frac = s - i0 as f64;
        if frac.abs() < 1e-12 {
            vec![(i0, 1.0)]
        } else {
            vec![(i0, 1.0 - frac), (i0 + 1, frac)]
        }
    };
    for jf in 0..nf {
        for i_f in 0..=nf {
            let (x, y) = (i_f as f64 * hf, (jf as f64 + 0.5) * hf);
            let jc = (y / hc).floor() as usize;
            for (ic, w) in normal(x) {
                p[(fine.u1(i_f, jf), coarse.u1(ic, jc))] += w;
            }
        }
    }
    for jf in 0..=nf {
        for i_f in 0..nf {
            let (x, y) = ((i_f as f64 + 0.5) * hf, jf as f64 * hf);
            let ic = (x / hc).floor() as usize;
            for (jc, w) in normal(y) {
                p[(fine.u2(i_f, jf), coarse.u2(ic, jc))] += w;
            }
        }
    }
    Ok(p)
}

/// Adjoint of `P_u` under the `h^2`-weighted inner products.
pub fn dense_restrict_velocity(coarse: Grid) -> Result<DMatrix<f64>> {
    let hf = 0.5 * coarse.h();
    let ratio = hf * hf / (coarse.h() * coarse.h());
    Ok(dense_prolong_velocity(coarse)?.transpose() * ratio)
}

/// Bilinear pressure prolongation through the cell centres, extrapolated
/// linearly past the outermost coarse centres.
pub fn dense_prolong_pressure(coarse: Grid) -> Result<DMatrix<f64>> {
    let fine = Grid::new(2 * coarse.n);
    guard(fine.len())?;
    let nc = coarse.n;
    let (hc, hf) = (coarse.h(), fine.h());
    let weights = |t: f64| -> [(usize, f64); 2] {
        let s = t / hc - 0.5;
        let i0 = (s.floor().max(0.0) as usize).min(nc - 2);
        let frac = s - i0 as f64;
        [(i0, 1.0 - frac), (i0 + 1, frac)]
    };
    let mut p = DMatrix::zeros(fine.len(), coarse.len());
    for jf in 0..fine.n {
        for i_f in 0..fine.n {
            let wx = weights((i_f as f64 + 0.5) * hf);
            let wy = weights((jf as f64 + 0.5) * hf);
            for (jc, b) in wy {
                for (ic, a) in wx {
                    p[(fine.p(i_f, jf), coarse.p(ic, jc))] += a * b;
                }
            }
        }
    }
    Ok(p)
}

/// Pressure restriction: mean of the fine cells whose centres lie in each coarse cell.
pub fn dense_restrict_pressure(coarse: Grid) -> Result<DMatrix<f64>> {
    let fine = Grid::new(2 * coarse.n);
    guard(fine.len())?;
    let mut r = DMatrix::zeros(coarse.len(), fine.len());
    for jf in 0..fine.n {
        for i_f in 0..fine.n {
            let (x, y) = ((i_f as f64 + 0.5) * fine.h(), (jf as f64 + 0.5) * fine.h());
            let (ic, jc) = ((x / coarse.h()) as usize, (y / coarse.h()) as usize);
            r[(coarse.p(ic, jc), fine.p(i_f, jf))] = 0.25;
        }
    }
    Ok(r)
}

/// One tile of a box decomposition.
#[derive(Clone, Debug)]
pub struct Block {
    /// Unknowns in the closure of the (overlapping) tile, ascending.
    pub dofs: Vec<usize>,
    /// Positions within `dofs` this tile writes back.
    pub owned: Vec<usize>,
}

/// Box decomposition with `box_size` cells per side, extended by `overlap`
/// cells. Each unknown is written back by the first tile, in row-major tile
/// order, whose unextended closure contains it.
pub fn tile_blocks(grid: Grid, box_size: usize, overlap: usize) -> Vec<Block> {
    let n = grid.n;
    let nb = n / box_size;
    let unknown = unknown_mask(grid);
    let closure = |x0: usize, x1: usize, y0: usize, y1: usize| -> Vec<usize> {
        let mut v = Vec::new();
        for j in 0..n {
            for i in 0..=n {
                let (x, y) = (i, 2 * j + 1);
                if x >= x0 && x <= x1 && y > 2 * y0 && y < 2 * y1 {
                    v.push(grid.u1(i, j));
                }
            }
        }
        for j in 0..=n {
            for i in 0..n {
                let (x, y) = (2 * i + 1, j);
                if x > 2 * x0 && x < 2 * x1 && y >= y0 && y <= y1 {
                    v.push(grid.u2(i, j));
                }
            }
        }
        for j in y0..y1 {
            for i in x0..x1 {
                v.push(grid.p(i, j));
            }
        }
        v.retain(|&k| unknown[k]);
        v.sort_unstable();
        v
    };
    let mut claimed = vec![false; grid.len()];
    let mut blocks = Vec::new();
    for by in 0..nb {
        for bx in 0..nb {
            let core = closure(bx * box_size, (bx + 1) * box_size, by * box_size, (by + 1) * box_size);
            let mine: Vec<usize> = core.into_iter().filter(|&k| !claimed[k]).collect();
            for &k in &mine {
                claimed[k] = true;
            }
            let dofs = closure(
                (bx * box_size).saturating_sub(overlap),
                ((bx + 1) * box_size + overlap).min(n),
                (by * box_size).saturating_sub(overlap),
                ((by + 1) * box_size + overlap).min(n),
            );
            let owned = dofs
                .iter()
                .enumerate()
                .filter(|(_, k)| mine.contains(k))
                .map(|(p, _)| p)
                .collect();
            blocks.push(Block { dofs, owned });
        }
    }
    blocks
}

fn block_correction(l: &DMatrix<f64>, block: &Block, r: &DVector<f64>) -> Result<DVector<f64>> {
    let local = submatrix(l, &block.dofs, &block.dofs);
    let rb = DVector::from_iterator(block.dofs.len(), block.dofs.iter().map(|&k| r[k]));
    dense_solve(&local, &rb, &[])
}

/// `w += sum_i R~_i^T L_i^{-1} R_i (b - L w)`, all tiles from the same residual.
pub fn block_jacobi_sweep(l: &DMatrix<f64>, blocks: &[Block], w: &mut DVector<f64>, b: &DVector<f64>) -> Result<()> {
    let r = b - l * &*w;
    let mut dw = DVector::zeros(w.len());
    for blk in blocks {
        let x = block_correction(l, blk, &r)?;
        for &p in &blk.owned {
            dw[blk.dofs[p]] += x[p];
        }
    }
    *w += dw;
    Ok(())
}

/// Tiles in order, each from the residual left by the previous ones.
pub fn block_gauss_seidel_sweep(
    l: &DMatrix<f64>,
    blocks: &[Block],
    w: &mut DVector<f64>,
    b: &DVector<f64>,
) -> Result<()> {
    for blk in blocks {
        let r = b - l * &*w;
        let x = block_correction(l, blk, &r)?;
        for &p in &blk.owned {
            w[blk.dofs[p]] += x[p];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_partitions_unity() {
        for k in 0..20 {
            let t = k as f64 / 20.0;
            let s: f64 = (-3..=3).map(|i| kernel(t - i as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_identity_and_two_by_two() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(dense_solve(&DMatrix::identity(3, 3), &b, &[]).unwrap(), b);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = dense_solve(&m, &DVector::from_vec(vec![3.0, 5.0]), &[]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let err = dense_solve(&m, &DVector::from_vec(vec![1.0, 2.0]), &[]).unwrap_err();
        assert!(matches!(err, OracleError::RankDeficient(_)));
    }

    #[test]
    fn size_guard() {
        assert!(matches!(dense_g(Grid::new(64)), Err(OracleError::TooLarge(_))));
    }
}
