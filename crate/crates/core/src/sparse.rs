//! Compressed sparse row matrices used for assembled operators.
//!
//! Storage and the structural algebra (triplet compression, sums, products,
//! transposes) come from `sprs`; the hot kernels (mat-vec, row sweeps) are
//! plain loops over the raw CSR arrays.

use sprs::{CsMat, TriMat};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    inner: CsMat<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug)]
pub struct TripletBuilder {
    tri: TriMat<f64>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            tri: TriMat::new((rows, cols)),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, nnz: usize) -> Self {
        Self {
            tri: TriMat::with_capacity((rows, cols), nnz),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.tri.add_triplet(row, col, value);
        }
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix {
            inner: self.tri.to_csr(),
        }
    }
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: CsMat::zero((rows, cols)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: CsMat::eye(n),
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.rows()
    }

    pub fn cols(&self) -> usize {
        self.inner.cols()
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.inner.indptr().outer_inds_sz(i);
        (
            &self.inner.indices()[range.clone()],
            &self.inner.data()[range],
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows().min(self.cols()))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols());
        assert_eq!(y.len(), self.rows());
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y += alpha A x`.
    pub fn mul_vec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols());
        assert_eq!(y.len(), self.rows());
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose_view().to_csr(),
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.cols(), other.rows());
        Self {
            inner: &self.inner * &other.inner,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Self {
        assert_eq!(self.rows(), other.rows());
        assert_eq!(self.cols(), other.cols());
        let a = self.inner.map(|v| alpha * v);
        let b = other.inner.map(|v| beta * v);
        Self { inner: &a + &b }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            inner: self.inner.map(|v| alpha * v),
        }
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.rows());
        let mut b = TripletBuilder::with_capacity(self.rows(), self.cols(), self.nnz());
        for (i, di) in d.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, v) in cols.iter().zip(vals) {
                b.push(i, c, di * v);
            }
        }
        b.build()
    }

    /// Keeps only entries whose row and column satisfy the masks.
    pub fn mask(&self, row_keep: &[bool], col_keep: &[bool]) -> Self {
        let mut b = TripletBuilder::with_capacity(self.rows(), self.cols(), self.nnz());
        for i in 0..self.rows() {
            if !row_keep[i] {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if col_keep[c] {
                    b.push(i, c, v);
                }
            }
        }
        b.build()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest entry of `|self - self^T|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.add_scaled(1.0, &t, -1.0).max_abs()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows()).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }

    /// Row-major dense copy; intended for small matrices in tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols()]; self.rows()];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }
}
