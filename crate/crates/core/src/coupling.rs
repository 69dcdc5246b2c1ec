//! Peskin's four-point delta kernel, force spreading `S`, velocity
//! interpolation `J`, and the assembled elasticity operator `S K J`.
//!
//! Both coupling operators are built from one sparse matrix `W` with a row per
//! Lagrangian coordinate (x-components first) and a column per velocity face:
//! `W[(c, k), f] = phi(dx / h) phi(dy / h)`. Then `J = W` and
//! `S = W^T diag(ds1 ds2) / h^2`, so `S = J*` under the grid-weighted and
//! fiber-weighted inner products.

use crate::error::{IbmgError, Result};
use crate::fiber::{flatten, unflatten, NodeArray, Structure};
use crate::grid::{BlockVector, StaggeredLevel};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Half-width of the kernel support in cells.
pub const SUPPORT_RADIUS: f64 = 2.0;

/// One-dimensional kernel `phi(r)`.
pub fn phi(r: f64) -> f64 {
    let a = r.abs();
    if a < 1.0 {
        (3.0 - 2.0 * a + (1.0 + 4.0 * a - 4.0 * a * a).sqrt()) / 8.0
    } else if a < 2.0 {
        (5.0 - 2.0 * a - (-7.0 + 12.0 * a - 4.0 * a * a).max(0.0).sqrt()) / 8.0
    } else {
        0.0
    }
}

/// Regularized delta function `delta_h(x) = phi(x/h) phi(y/h) / h^2`.
pub fn delta_h(dx: f64, dy: f64, h: f64) -> f64 {
    phi(dx / h) * phi(dy / h) / (h * h)
}

/// Kernel stencils of a structure frozen at one configuration.
#[derive(Clone, Debug)]
pub struct CouplingOperators {
    level: StaggeredLevel,
    nodes: usize,
    weights: Vec<f64>,
    w: CsrMatrix,
    wt: CsrMatrix,
}

impl CouplingOperators {
    pub fn new(level: &StaggeredLevel, structure: &Structure) -> Result<Self> {
        let h = level.h();
        let n = level.n();
        let positions = structure.positions();
        let m = positions.len();
        let margin = SUPPORT_RADIUS * h;
        for (k, p) in positions.iter().enumerate() {
            if p.iter().any(|&c| c < margin || c > 1.0 - margin) {
                return Err(IbmgError::NodeNearBoundary {
                    node: k,
                    x: p[0],
                    y: p[1],
                });
            }
        }
        let mut b = TripletBuilder::with_capacity(2 * m, level.len(), 32 * m);
        for (k, &[x, y]) in positions.iter().enumerate() {
            // x-faces sit at (i h, (j + 1/2) h).
            let (sx, sy) = (x / h, y / h - 0.5);
            let (i0, j0) = (sx.floor() as isize - 1, sy.floor() as isize - 1);
            for j in j0..j0 + 4 {
                let wy = phi(sy - j as f64);
                for i in i0..i0 + 4 {
                    if i <= 0 || i >= n as isize || j < 0 || j >= n as isize {
                        continue;
                    }
                    b.push(k, level.u1(i as usize, j as usize), phi(sx - i as f64) * wy);
                }
            }
            // y-faces sit at ((i + 1/2) h, j h).
            let (sx, sy) = (x / h - 0.5, y / h);
            let (i0, j0) = (sx.floor() as isize - 1, sy.floor() as isize - 1);
            for j in j0..j0 + 4 {
                let wy = phi(sy - j as f64);
                for i in i0..i0 + 4 {
                    if j <= 0 || j >= n as isize || i < 0 || i >= n as isize {
                        continue;
                    }
                    b.push(m + k, level.u2(i as usize, j as usize), phi(sx - i as f64) * wy);
                }
            }
        }
        let w = b.build();
        let wt = w.transpose();
        Ok(Self {
            level: *level,
            nodes: m,
            weights: structure.weights(),
            w,
            wt,
        })
    }

    pub fn level(&self) -> &StaggeredLevel {
        &self.level
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Interpolation matrix `J` (coordinates x faces).
    pub fn interpolation_matrix(&self) -> &CsrMatrix {
        &self.w
    }

    /// Spreading matrix `S` (faces x coordinates).
    pub fn spreading_matrix(&self) -> CsrMatrix {
        let h2 = self.level.h() * self.level.h();
        let d: Vec<f64> = self
            .weights
            .iter()
            .chain(&self.weights)
            .map(|w| w / h2)
            .collect();
        self.w.scale_rows(&d).transpose()
    }

    /// `f = S F`; the pressure block of the result is zero.
    pub fn spread(&self, force: &[[f64; 2]]) -> Result<BlockVector> {
        if force.len() != self.nodes {
            return Err(IbmgError::ShapeMismatch {
                expected: self.nodes,
                found: force.len(),
            });
        }
        let h2 = self.level.h() * self.level.h();
        let mut flat = flatten(force);
        let m = self.nodes;
        for (k, v) in flat.iter_mut().enumerate() {
            *v *= self.weights[k % m] / h2;
        }
        let data = self.wt.mul_vec(&flat);
        BlockVector::from_data(&self.level, data)
    }

    /// `U = J u`, reading interior velocity faces only.
    pub fn interpolate(&self, u: &BlockVector) -> Result<NodeArray> {
        self.level.check_same(u.level())?;
        Ok(unflatten(&self.w.mul_vec(u.data())))
    }

    /// Assembled `S K J` over the level's flat index space; `k` acts on
    /// `2 * nodes` coordinates (x-components first).
    pub fn assemble_skj(&self, k: &CsrMatrix) -> CsrMatrix {
        let h2 = self.level.h() * self.level.h();
        let d: Vec<f64> = self
            .weights
            .iter()
            .chain(&self.weights)
            .map(|w| w / h2)
            .collect();
        let kw = k.matmul(&self.w).scale_rows(&d);
        self.wt.matmul(&kw)
    }

    /// Matrix-free `S K J u`.
    pub fn apply_skj(&self, structure: &Structure, u: &BlockVector) -> Result<BlockVector> {
        let x = self.interpolate(u)?;
        let f = structure.apply_k(&x)?;
        self.spread(&f)
    }
}
