//! The Stokes-IB block operator on each level of the hierarchy.
//!
//! `L_IB = [[A - dt E, G], [-D, 0]]` where `E = S K J` on the finest level and
//! `E_c = R_u E_f P_u` on coarser levels. `A`, `G`, `D` are rediscretized on
//! every level.

use crate::error::Result;
use crate::grid::{BlockVector, GridHierarchy, StaggeredLevel};
use crate::operators::{apply_a, apply_d, apply_g, assemble_a, assemble_d, assemble_g, FluidParams};
use crate::sparse::CsrMatrix;
use crate::transfer::velocity_prolongation_matrix;

#[derive(Clone, Debug)]
pub struct LevelSystem {
    level: StaggeredLevel,
    params: FluidParams,
    a: CsrMatrix,
    g: CsrMatrix,
    d: CsrMatrix,
    e: CsrMatrix,
    a_ib: CsrMatrix,
    l: CsrMatrix,
    lt: CsrMatrix,
}

impl LevelSystem {
    /// Builds the level operator from an elasticity matrix `e` over the level's
    /// flat index space (velocity-unknown rows and columns only).
    pub fn new(level: &StaggeredLevel, params: FluidParams, e: CsrMatrix) -> Self {
        assert_eq!(e.rows(), level.len());
        assert_eq!(e.cols(), level.len());
        let a = assemble_a(&params, level);
        let g = assemble_g(level);
        let d = assemble_d(level);
        let a_ib = a.add_scaled(1.0, &e, -params.dt);
        let l = a_ib.add_scaled(1.0, &g, 1.0).add_scaled(1.0, &d, -1.0);
        let lt = l.transpose();
        Self {
            level: *level,
            params,
            a,
            g,
            d,
            e,
            a_ib,
            l,
            lt,
        }
    }

    /// Plain Stokes operator (no immersed structure).
    pub fn stokes(level: &StaggeredLevel, params: FluidParams) -> Self {
        Self::new(level, params, CsrMatrix::zeros(level.len(), level.len()))
    }

    pub fn level(&self) -> &StaggeredLevel {
        &self.level
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn g(&self) -> &CsrMatrix {
        &self.g
    }

    pub fn d(&self) -> &CsrMatrix {
        &self.d
    }

    /// Elasticity block `S K J` of this level.
    pub fn e(&self) -> &CsrMatrix {
        &self.e
    }

    /// Modified momentum operator `A - dt E`.
    pub fn a_ib(&self) -> &CsrMatrix {
        &self.a_ib
    }

    /// Assembled `L_IB`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.l
    }

    /// Transpose of the assembled `L_IB` (column access).
    pub fn matrix_transpose(&self) -> &CsrMatrix {
        &self.lt
    }

    /// `L_IB w` with stencil kernels for `A`, `G`, `D`; boundary faces of `w` are ignored.
    pub fn apply(&self, w: &BlockVector) -> Result<BlockVector> {
        self.level.check_same(w.level())?;
        let mut wi = w.clone();
        wi.zero_boundary();
        let mut out = apply_a(&self.params, &self.level, &wi)?;
        out.axpy(1.0, &apply_g(&self.level, &wi)?)?;
        out.axpy(-1.0, &apply_d(&self.level, &wi)?)?;
        self.e.mul_vec_acc(-self.params.dt, wi.data(), out.data_mut());
        Ok(out)
    }

    /// `L_IB w` through the assembled matrix.
    pub fn apply_assembled(&self, w: &BlockVector) -> Result<BlockVector> {
        self.level.check_same(w.level())?;
        let mut out = BlockVector::zeros(&self.level);
        self.l.mul_vec_into(w.data(), out.data_mut());
        Ok(out)
    }

    /// `b - L_IB w`.
    pub fn residual(&self, w: &BlockVector, b: &BlockVector) -> Result<BlockVector> {
        self.level.check_same(b.level())?;
        let mut r = b.clone();
        self.residual_into(w.data(), r.data_mut());
        Ok(r)
    }

    /// `r <- r - L_IB w` on raw arrays.
    pub(crate) fn residual_into(&self, w: &[f64], r: &mut [f64]) {
        self.l.mul_vec_acc(-1.0, w, r);
    }
}

/// One [`LevelSystem`] per grid level, coarsest first.
#[derive(Clone, Debug)]
pub struct SystemHierarchy {
    grid: GridHierarchy,
    levels: Vec<LevelSystem>,
}

impl SystemHierarchy {
    /// Galerkin-coarsens the finest elasticity block `e_fine` and rediscretizes
    /// `A`, `G`, `D` on every level.
    pub fn new(grid: GridHierarchy, params: FluidParams, e_fine: CsrMatrix) -> Result<Self> {
        let nl = grid.n_levels();
        let mut es = vec![e_fine];
        for l in (1..nl).rev() {
            let fine = grid.level(l);
            let coarse = grid.level(l - 1);
            let p = velocity_prolongation_matrix(coarse, fine, true)?;
            let ef = es.last().unwrap();
            let ec = p.transpose().matmul(&ef.matmul(&p)).scale(0.25);
            es.push(ec);
        }
        es.reverse();
        let levels = grid
            .levels()
            .iter()
            .zip(es)
            .map(|(lv, e)| LevelSystem::new(lv, params, e))
            .collect();
        Ok(Self { grid, levels })
    }

    /// Hierarchy without an immersed structure.
    pub fn stokes(grid: GridHierarchy, params: FluidParams) -> Result<Self> {
        let n = grid.finest().len();
        Self::new(grid, params, CsrMatrix::zeros(n, n))
    }

    pub fn grid(&self) -> &GridHierarchy {
        &self.grid
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &LevelSystem {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[LevelSystem] {
        &self.levels
    }

    pub fn finest(&self) -> &LevelSystem {
        self.levels.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingOperators;
    use crate::fiber::{make_thin_membrane, Structure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(level: &StaggeredLevel, seed: u64) -> BlockVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = BlockVector::from_fn(level, |_, _, _| rng.random_range(-1.0..1.0));
        v.zero_boundary();
        v
    }

    fn membrane_hierarchy(n: usize) -> SystemHierarchy {
        let grid = GridHierarchy::new(n).unwrap();
        let level = *grid.finest();
        let params = FluidParams::new(0.0, 1.0, 0.32 * level.h()).unwrap();
        let s = Structure::new(vec![make_thin_membrane(n, 7.0 * 786.0).unwrap()]);
        let ops = CouplingOperators::new(&level, &s).unwrap();
        let e = ops.assemble_skj(&s.assemble_k());
        SystemHierarchy::new(grid, params, e).unwrap()
    }

    #[test]
    fn assembled_and_stencil_paths_agree() {
        let h = membrane_hierarchy(32);
        for sys in h.levels() {
            let w = random(sys.level(), 3);
            let a = sys.apply(&w).unwrap();
            let b = sys.apply_assembled(&w).unwrap();
            let scale = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn operator_is_symmetric_and_elasticity_semidefinite() {
        let h = membrane_hierarchy(32);
        for sys in h.levels() {
            let l = sys.matrix();
            assert!(l.asymmetry() <= 1e-12 * l.max_abs(), "level {}", sys.level().n());
            let e = sys.e();
            assert!(e.asymmetry() <= 1e-12 * e.max_abs().max(1e-300));
            let u = random(sys.level(), 9);
            let q: f64 = u.data().iter().zip(e.mul_vec(u.data())).map(|(a, b)| a * b).sum();
            assert!(-sys.dt() * q >= -1e-10 * u.data().iter().map(|v| v * v).sum::<f64>());
        }
    }

    #[test]
    fn residual_is_affine() {
        let grid = GridHierarchy::new(16).unwrap();
        let params = FluidParams::new(1.0, 0.1, 0.02).unwrap();
        let h = SystemHierarchy::stokes(grid, params).unwrap();
        let sys = h.finest();
        let b = random(sys.level(), 1);
        let w1 = random(sys.level(), 2);
        let w2 = random(sys.level(), 3);
        let mut w12 = w1.clone();
        w12.axpy(1.0, &w2).unwrap();
        let lhs = sys.residual(&w12, &b).unwrap();
        let mut rhs = sys.residual(&w1, &b).unwrap();
        rhs.axpy(-1.0, &sys.apply(&w2).unwrap()).unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert_eq!(sys.residual(&BlockVector::zeros(sys.level()), &b).unwrap(), b);
        assert!(h.levels().iter().all(|s| s.e().nnz() == 0));
    }
}
