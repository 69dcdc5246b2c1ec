//! Uniform staggered (MAC) grid hierarchy on the unit square.
//!
//! Every level stores its degrees of freedom in one flat array laid out as
//! `[u1 | u2 | p]`:
//!
//! * `u1` lives on x-faces `(i, j)`, `i = 0..=n`, `j = 0..n`, at `(i h, (j + 1/2) h)`;
//! * `u2` lives on y-faces `(i, j)`, `i = 0..n`, `j = 0..=n`, at `((i + 1/2) h, j h)`;
//! * `p` lives at cell centers `(i, j)` at `((i + 1/2) h, (j + 1/2) h)`.
//!
//! Faces on the physical boundary (`i = 0, n` for `u1`, `j = 0, n` for `u2`) are
//! stored but carry Dirichlet data and are never unknowns. Sparse matrices on a
//! level are indexed by the same flat layout; boundary rows and columns are empty.

use crate::error::{IbmgError, Result};

/// Cells per side on the coarsest level.
pub const COARSEST_N: usize = 8;

/// Refinement ratio between adjacent levels.
pub const REFINEMENT_RATIO: usize = 2;

/// Which field a flat index belongs to, with its grid indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dof {
    U1 { i: usize, j: usize },
    U2 { i: usize, j: usize },
    P { i: usize, j: usize },
}

/// One level of the staggered grid hierarchy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaggeredLevel {
    index: usize,
    n: usize,
    h: f64,
}

impl StaggeredLevel {
    pub fn new(index: usize, n: usize) -> Self {
        assert!(n > 0, "level must have at least one cell");
        Self {
            index,
            n,
            h: 1.0 / n as f64,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of stored x-face (or y-face) values.
    pub fn faces_per_component(&self) -> usize {
        (self.n + 1) * self.n
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.faces_per_component()
    }

    pub fn n_pressure(&self) -> usize {
        self.n * self.n
    }

    /// Total stored entries, boundary faces included.
    pub fn len(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u2_offset(&self) -> usize {
        self.faces_per_component()
    }

    pub fn p_offset(&self) -> usize {
        self.n_velocity()
    }

    #[inline]
    pub fn u1(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.n && j < self.n);
        j * (self.n + 1) + i
    }

    #[inline]
    pub fn u2(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j <= self.n);
        self.u2_offset() + j * self.n + i
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        self.p_offset() + j * self.n + i
    }

    pub fn decode(&self, idx: usize) -> Dof {
        let n = self.n;
        if idx < self.u2_offset() {
            Dof::U1 {
                i: idx % (n + 1),
                j: idx / (n + 1),
            }
        } else if idx < self.p_offset() {
            let k = idx - self.u2_offset();
            Dof::U2 { i: k % n, j: k / n }
        } else {
            let k = idx - self.p_offset();
            Dof::P { i: k % n, j: k / n }
        }
    }

    /// True for velocity faces on the physical boundary.
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        match self.decode(idx) {
            Dof::U1 { i, .. } => i == 0 || i == self.n,
            Dof::U2 { j, .. } => j == 0 || j == self.n,
            Dof::P { .. } => false,
        }
    }

    /// `true` for every stored entry that is an unknown of the linear system.
    pub fn unknown_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|k| !self.is_boundary(k)).collect()
    }

    pub fn u1_position(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.h, (j as f64 + 0.5) * self.h)
    }

    pub fn u2_position(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.h, j as f64 * self.h)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    /// Physical location of any stored entry.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        match self.decode(idx) {
            Dof::U1 { i, j } => self.u1_position(i, j),
            Dof::U2 { i, j } => self.u2_position(i, j),
            Dof::P { i, j } => self.cell_center(i, j),
        }
    }

    pub fn check_same(&self, other: &StaggeredLevel) -> Result<()> {
        if self.n != other.n {
            return Err(IbmgError::LevelMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

/// The full hierarchy, coarsest level first.
#[derive(Clone, Debug)]
pub struct GridHierarchy {
    levels: Vec<StaggeredLevel>,
}

impl GridHierarchy {
    /// Builds levels `n = 8, 16, ..., finest_n`. `finest_n` must be `8 * 2^k`.
    pub fn new(finest_n: usize) -> Result<Self> {
        if finest_n < COARSEST_N
            || !finest_n.is_multiple_of(COARSEST_N)
            || !(finest_n / COARSEST_N).is_power_of_two()
        {
            return Err(IbmgError::InvalidGridSize(finest_n));
        }
        let n_levels = (finest_n / COARSEST_N).trailing_zeros() as usize + 1;
        let levels = (0..n_levels)
            .map(|l| StaggeredLevel::new(l, COARSEST_N << l))
            .collect();
        Ok(Self { levels })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest_n(&self) -> usize {
        self.finest().n()
    }

    pub fn refinement_ratio(&self) -> usize {
        REFINEMENT_RATIO
    }

    pub fn level(&self, l: usize) -> &StaggeredLevel {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[StaggeredLevel] {
        &self.levels
    }

    pub fn finest(&self) -> &StaggeredLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }
}

/// Paired velocity/pressure field on one level.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    level: StaggeredLevel,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(level: &StaggeredLevel) -> Self {
        Self {
            level: *level,
            data: vec![0.0; level.len()],
        }
    }

    pub fn from_data(level: &StaggeredLevel, data: Vec<f64>) -> Result<Self> {
        if data.len() != level.len() {
            return Err(IbmgError::ShapeMismatch {
                expected: level.len(),
                found: data.len(),
            });
        }
        Ok(Self {
            level: *level,
            data,
        })
    }

    /// Samples `f(x, y)` at the location of every stored entry.
    pub fn from_fn(level: &StaggeredLevel, mut f: impl FnMut(Dof, f64, f64) -> f64) -> Self {
        let data = (0..level.len())
            .map(|k| {
                let (x, y) = level.position(k);
                f(level.decode(k), x, y)
            })
            .collect();
        Self {
            level: *level,
            data,
        }
    }

    pub fn level(&self) -> &StaggeredLevel {
        &self.level
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn velocity(&self) -> &[f64] {
        &self.data[..self.level.p_offset()]
    }

    pub fn velocity_mut(&mut self) -> &mut [f64] {
        let off = self.level.p_offset();
        &mut self.data[..off]
    }

    pub fn pressure(&self) -> &[f64] {
        &self.data[self.level.p_offset()..]
    }

    pub fn pressure_mut(&mut self) -> &mut [f64] {
        let off = self.level.p_offset();
        &mut self.data[off..]
    }

    pub fn u1(&self, i: usize, j: usize) -> f64 {
        self.data[self.level.u1(i, j)]
    }

    pub fn u2(&self, i: usize, j: usize) -> f64 {
        self.data[self.level.u2(i, j)]
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.data[self.level.p(i, j)]
    }

    /// Grid-weighted inner product `h^2 * sum(a_k b_k)` over every stored entry.
    pub fn inner_product(&self, other: &BlockVector) -> Result<f64> {
        self.level.check_same(&other.level)?;
        let h2 = self.level.h() * self.level.h();
        Ok(h2 * dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        let h2 = self.level.h() * self.level.h();
        (h2 * dot(&self.data, &self.data)).sqrt()
    }

    /// `self <- self + alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &BlockVector) -> Result<()> {
        self.level.check_same(&x.level)?;
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += alpha * xv;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn copy_from(&mut self, x: &BlockVector) -> Result<()> {
        self.level.check_same(&x.level)?;
        self.data.copy_from_slice(&x.data);
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn mean_pressure(&self) -> f64 {
        let p = self.pressure();
        p.iter().sum::<f64>() / p.len() as f64
    }

    /// Removes the constant pressure mode.
    pub fn project_mean_pressure(&mut self) {
        let mean = self.mean_pressure();
        self.pressure_mut().iter_mut().for_each(|v| *v -= mean);
    }

    /// Zeroes every boundary face.
    pub fn zero_boundary(&mut self) {
        let n = self.level.n();
        for j in 0..n {
            let a = self.level.u1(0, j);
            let b = self.level.u1(n, j);
            self.data[a] = 0.0;
            self.data[b] = 0.0;
        }
        for i in 0..n {
            let a = self.level.u2(i, 0);
            let b = self.level.u2(i, n);
            self.data[a] = 0.0;
            self.data[b] = 0.0;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
