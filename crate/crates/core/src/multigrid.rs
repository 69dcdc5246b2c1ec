//! Recursive V-cycle over a [`SystemHierarchy`] with a dense coarsest-level solve.

use faer::Mat;

use crate::dense::DenseLu;
use crate::error::{IbmgError, Result};
use crate::grid::BlockVector;
use crate::smoothers::{LevelSmoother, SmootherConfig};
use crate::system::{LevelSystem, SystemHierarchy};
use crate::transfer::{prolong, restrict};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultigridConfig {
    pub smoother: SmootherConfig,
    pub nu1: usize,
    pub nu2: usize,
}

impl MultigridConfig {
    pub fn new(smoother: SmootherConfig) -> Self {
        Self {
            smoother,
            nu1: 1,
            nu2: 1,
        }
    }
}

/// Dense bordered LU of the coarsest operator on its unknowns.
#[derive(Debug)]
pub struct CoarseSolver {
    dofs: Vec<usize>,
    lu: DenseLu,
}

impl CoarseSolver {
    pub fn new(sys: &LevelSystem) -> Result<Self> {
        let level = sys.level();
        let dofs: Vec<usize> = (0..level.len()).filter(|&k| !level.is_boundary(k)).collect();
        let mut pos = vec![usize::MAX; level.len()];
        for (k, &g) in dofs.iter().enumerate() {
            pos[g] = k;
        }
        let l = sys.matrix();
        let mut m = Mat::<f64>::zeros(dofs.len(), dofs.len());
        for (k, &g) in dofs.iter().enumerate() {
            let (cols, vals) = l.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if pos[c] != usize::MAX {
                    m[(k, pos[c])] = v;
                }
            }
        }
        let pressure: Vec<usize> = dofs
            .iter()
            .enumerate()
            .filter(|&(_, &g)| g >= level.p_offset())
            .map(|(k, _)| k)
            .collect();
        let lu = DenseLu::factor_bordered(&m, &pressure)?;
        Ok(Self { dofs, lu })
    }

    /// Solves `L x = b` with the constant pressure mode removed from `b` and `x`.
    pub fn solve(&self, b: &BlockVector) -> BlockVector {
        let mut bp = b.clone();
        bp.project_mean_pressure();
        let mut v: Vec<f64> = self.dofs.iter().map(|&g| bp.data()[g]).collect();
        self.lu.solve_in_place(&mut v);
        let mut x = BlockVector::zeros(b.level());
        for (k, &g) in self.dofs.iter().enumerate() {
            x.data_mut()[g] = v[k];
        }
        x.project_mean_pressure();
        x
    }
}

/// A V-cycle preconditioner: hierarchy, per-level smoothers and coarse solver.
#[derive(Debug)]
pub struct Multigrid {
    hier: SystemHierarchy,
    cfg: MultigridConfig,
    smoothers: Vec<Option<LevelSmoother>>,
    coarse: CoarseSolver,
}

impl Multigrid {
    pub fn new(hier: SystemHierarchy, cfg: MultigridConfig) -> Result<Self> {
        if cfg.nu1 + cfg.nu2 == 0 {
            return Err(IbmgError::InvalidConfig("need nu1 + nu2 >= 1".into()));
        }
        let coarse = CoarseSolver::new(hier.level(0))?;
        let smoothers = hier
            .levels()
            .iter()
            .enumerate()
            .map(|(l, sys)| {
                if l == 0 {
                    Ok(None)
                } else {
                    LevelSmoother::new(sys, &cfg.smoother).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            hier,
            cfg,
            smoothers,
            coarse,
        })
    }

    pub fn hierarchy(&self) -> &SystemHierarchy {
        &self.hier
    }

    pub fn config(&self) -> &MultigridConfig {
        &self.cfg
    }

    pub fn smoother(&self, level: usize) -> Option<&LevelSmoother> {
        self.smoothers.get(level).and_then(|s| s.as_ref())
    }

    pub fn coarse_solve(&self, b: &BlockVector) -> Result<BlockVector> {
        self.hier.level(0).level().check_same(b.level())?;
        Ok(self.coarse.solve(b))
    }

    /// One V-cycle on the finest level from a zero initial guess.
    pub fn v_cycle(&self, b: &BlockVector) -> Result<BlockVector> {
        let top = self.hier.n_levels() - 1;
        let mut w = BlockVector::zeros(b.level());
        self.cycle(top, &mut w, b)?;
        w.project_mean_pressure();
        Ok(w)
    }

    /// One V-cycle on the finest level starting from `w`.
    pub fn v_cycle_from(&self, w: &mut BlockVector, b: &BlockVector) -> Result<()> {
        self.cycle(self.hier.n_levels() - 1, w, b)?;
        w.project_mean_pressure();
        Ok(())
    }

    fn cycle(&self, l: usize, w: &mut BlockVector, b: &BlockVector) -> Result<()> {
        let sys = self.hier.level(l);
        sys.level().check_same(b.level())?;
        if l == 0 {
            let r = sys.residual(w, b)?;
            w.axpy(1.0, &self.coarse.solve(&r))?;
            return Ok(());
        }
        let smoother = self.smoothers[l].as_ref().unwrap();
        let wrap = self.cfg.smoother.wrap;
        if self.cfg.nu1 > 0 {
            smoother.smooth(sys, w, b, self.cfg.nu1, wrap)?;
        }
        let r = sys.residual(w, b)?;
        let coarse_level = *self.hier.level(l - 1).level();
        let mut rc = restrict(&r, &coarse_level)?;
        rc.zero_boundary();
        rc.project_mean_pressure();
        let mut ec = BlockVector::zeros(&coarse_level);
        self.cycle(l - 1, &mut ec, &rc)?;
        let mut ef = prolong(&ec, sys.level())?;
        ef.zero_boundary();
        w.axpy(1.0, &ef)?;
        if self.cfg.nu2 > 0 {
            smoother.smooth(sys, w, b, self.cfg.nu2, wrap)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridHierarchy;
    use crate::operators::FluidParams;
    use crate::smoothers::SmootherKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(level: &crate::grid::StaggeredLevel, seed: u64) -> BlockVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = BlockVector::from_fn(level, |_, _, _| rng.random_range(-1.0..1.0));
        v.zero_boundary();
        v.project_mean_pressure();
        v
    }

    fn stokes(n: usize) -> SystemHierarchy {
        let grid = GridHierarchy::new(n).unwrap();
        let params = FluidParams::new(0.0, 1.0, 0.32 / n as f64).unwrap();
        SystemHierarchy::stokes(grid, params).unwrap()
    }

    #[test]
    fn coarse_solver_is_exact() {
        let h = stokes(8);
        let sys = h.level(0);
        let coarse = CoarseSolver::new(sys).unwrap();
        let b = random(sys.level(), 1);
        let x = coarse.solve(&b);
        let r = sys.residual(&x, &b).unwrap();
        assert!(r.norm() <= 1e-11 * b.norm());
        assert!(x.mean_pressure().abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_smoothing() {
        let mut cfg = MultigridConfig::new(SmootherConfig::new(SmootherKind::Ras));
        cfg.nu1 = 0;
        cfg.nu2 = 0;
        assert!(matches!(Multigrid::new(stokes(16), cfg), Err(IbmgError::InvalidConfig(_))));
    }

    #[test]
    fn unwrapped_cycle_is_linear() {
        for kind in [SmootherKind::Ras, SmootherKind::Rms] {
            let cfg = MultigridConfig::new(SmootherConfig::schwarz(kind, 4, 1).with_wrap(0));
            let mg = Multigrid::new(stokes(32), cfg).unwrap();
            let level = *mg.hierarchy().finest().level();
            let b1 = random(&level, 2);
            let b2 = random(&level, 3);
            let mut b = b1.clone();
            b.axpy(-2.5, &b2).unwrap();
            let mut z = mg.v_cycle(&b1).unwrap();
            z.axpy(-2.5, &mg.v_cycle(&b2).unwrap()).unwrap();
            let zb = mg.v_cycle(&b).unwrap();
            z.axpy(-1.0, &zb).unwrap();
            assert!(z.norm() <= 1e-10 * zb.norm(), "{kind}");
        }
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let cfg = MultigridConfig::new(SmootherConfig::schwarz(SmootherKind::Rms, 4, 1).with_wrap(0));
        let mg = Multigrid::new(stokes(32), cfg).unwrap();
        let sys = mg.hierarchy().finest();
        let x = random(sys.level(), 4);
        let b = sys.apply(&x).unwrap();
        let mut w = x.clone();
        mg.v_cycle_from(&mut w, &b).unwrap();
        w.axpy(-1.0, &x).unwrap();
        assert!(w.norm() <= 1e-9 * x.norm());
    }

    #[test]
    fn stokes_cycle_contracts_the_error() {
        let h = stokes(64);
        let level = *h.finest().level();
        let b = random(&level, 5);
        let reference = {
            let mg = Multigrid::new(stokes(64), MultigridConfig::new(SmootherConfig::new(SmootherKind::Ras))).unwrap();
            let cfg = crate::driver::SolverConfig { tol: 1e-14, max_iters: 100 };
            crate::driver::solve(&mg, &b, &cfg).unwrap().0
        };
        for kind in [SmootherKind::Ras, SmootherKind::Rms, SmootherKind::Sc] {
            let mg = Multigrid::new(stokes(64), MultigridConfig::new(SmootherConfig::new(kind))).unwrap();
            let mut w = BlockVector::zeros(&level);
            let mut prev = reference.norm();
            for _ in 0..3 {
                mg.v_cycle_from(&mut w, &b).unwrap();
                let mut e = reference.clone();
                e.axpy(-1.0, &w).unwrap();
                e.project_mean_pressure();
                let en = e.norm();
                assert!(en < 0.5 * prev, "{kind}: {en:e} vs {prev:e}");
                prev = en;
            }
        }
    }

    #[test]
    fn single_level_cycle_is_the_coarse_solve() {
        let mg = Multigrid::new(stokes(8), MultigridConfig::new(SmootherConfig::new(SmootherKind::Sc))).unwrap();
        let b = random(mg.hierarchy().finest().level(), 6);
        let z = mg.v_cycle(&b).unwrap();
        let mut c = mg.coarse_solve(&b).unwrap();
        c.axpy(-1.0, &z).unwrap();
        assert!(c.norm() <= 1e-13 * z.norm());
        assert!(mg.coarse_solve(&BlockVector::zeros(b.level())).unwrap().norm() == 0.0);
    }

    #[test]
    fn exact_smoothers_give_exact_cycle() {
        // Whole-level boxes make every smoothing step a direct solve.
        let cfg = MultigridConfig::new(SmootherConfig::schwarz(SmootherKind::Ras, 32, 0));
        let mg = Multigrid::new(stokes(32), cfg).unwrap();
        let sys = mg.hierarchy().finest();
        let b = random(sys.level(), 7);
        let z = mg.v_cycle(&b).unwrap();
        let mut r = sys.residual(&z, &b).unwrap();
        r.zero_boundary();
        assert!(r.norm() <= 1e-10 * b.norm());
    }
}
