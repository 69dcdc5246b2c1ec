//! Multigrid smoothers: restricted additive Schwarz (RAS), restricted
//! multiplicative Schwarz (RMS) and the Schur-complement factorization (SC),
//! each wrapped in a fixed number of FGMRES iterations.

pub mod schur;
pub mod schwarz;

use std::fmt;
use std::str::FromStr;

use crate::error::{IbmgError, Result};
use crate::grid::BlockVector;
use crate::krylov::fgmres;
use crate::system::LevelSystem;

pub use schur::{ChebyshevBounds, ScConfig, SchurSmoother};
pub use schwarz::{Subdomain, SubdomainPartition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    Ras,
    Rms,
    Sc,
}

impl SmootherKind {
    pub fn name(&self) -> &'static str {
        match self {
            SmootherKind::Ras => "RAS",
            SmootherKind::Rms => "RMS",
            SmootherKind::Sc => "SC",
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmootherKind {
    type Err = IbmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RAS" => Ok(SmootherKind::Ras),
            "RMS" => Ok(SmootherKind::Rms),
            "SC" => Ok(SmootherKind::Sc),
            other => Err(IbmgError::InvalidConfig(format!("unknown smoother '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    /// Schwarz tile size in cells (clamped to the level size).
    pub box_size: usize,
    /// Schwarz overlap in cells.
    pub overlap: usize,
    /// FGMRES iterations per smoothing application; 0 applies the inner smoother directly.
    pub wrap: usize,
    pub sc: ScConfig,
}

impl SmootherConfig {
    pub fn new(kind: SmootherKind) -> Self {
        Self {
            kind,
            box_size: 8,
            overlap: 2,
            wrap: 2,
            sc: ScConfig::default(),
        }
    }

    pub fn schwarz(kind: SmootherKind, box_size: usize, overlap: usize) -> Self {
        Self {
            box_size,
            overlap,
            ..Self::new(kind)
        }
    }

    pub fn with_wrap(mut self, wrap: usize) -> Self {
        self.wrap = wrap;
        self
    }
}

/// The inner smoothing engine of one level.
#[derive(Debug)]
pub enum LevelSmoother {
    Ras(SubdomainPartition),
    Rms(SubdomainPartition),
    Sc(SchurSmoother),
}

impl LevelSmoother {
    pub fn new(sys: &LevelSystem, cfg: &SmootherConfig) -> Result<Self> {
        let n = sys.level().n();
        let box_size = cfg.box_size.min(n);
        Ok(match cfg.kind {
            SmootherKind::Ras => LevelSmoother::Ras(SubdomainPartition::new(sys, box_size, cfg.overlap)?),
            SmootherKind::Rms => LevelSmoother::Rms(SubdomainPartition::new(sys, box_size, cfg.overlap)?),
            SmootherKind::Sc => LevelSmoother::Sc(SchurSmoother::new(sys, cfg.sc)?),
        })
    }

    /// One unwrapped application: `w <- w + B (b - L w)`.
    pub fn apply(&self, sys: &LevelSystem, w: &mut [f64], b: &[f64]) {
        match self {
            LevelSmoother::Ras(p) => p.ras_apply(sys, w, b),
            LevelSmoother::Rms(p) => p.rms_apply(sys, w, b),
            LevelSmoother::Sc(s) => s.apply(sys, w, b),
        }
    }

    /// `nu` smoothing applications, each `wrap` FGMRES steps right-preconditioned
    /// by the inner smoother and warm-started from `w`.
    pub fn smooth(
        &self,
        sys: &LevelSystem,
        w: &mut BlockVector,
        b: &BlockVector,
        nu: usize,
        wrap: usize,
    ) -> Result<()> {
        if nu == 0 {
            return Err(IbmgError::InvalidConfig("smoothing needs nu >= 1".into()));
        }
        sys.level().check_same(w.level())?;
        sys.level().check_same(b.level())?;
        for _ in 0..nu {
            if wrap == 0 {
                self.apply(sys, w.data_mut(), b.data());
                continue;
            }
            let l = sys.matrix();
            fgmres(
                |v, out| {
                    l.mul_vec_into(v, out);
                    Ok(())
                },
                |v, out| {
                    out.fill(0.0);
                    self.apply(sys, out, v);
                    Ok(())
                },
                b.data(),
                w.data_mut(),
                0.0,
                wrap,
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::ProblemSpec;
    use crate::fiber::Geometry;
    use crate::grid::{Dof, GridHierarchy, StaggeredLevel};
    use crate::operators::FluidParams;
    use crate::system::SystemHierarchy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(level: &StaggeredLevel, seed: u64) -> BlockVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = BlockVector::from_fn(level, |_, _, _| rng.random_range(-1.0..1.0));
        v.zero_boundary();
        v.project_mean_pressure();
        v
    }

    fn stokes_level(n: usize) -> LevelSystem {
        let grid = GridHierarchy::new(n).unwrap();
        let params = FluidParams::new(0.0, 1.0, 0.32 / n as f64).unwrap();
        let h = SystemHierarchy::stokes(grid, params).unwrap();
        h.levels().last().unwrap().clone()
    }

    /// Squared amplitude of the checkerboard mode, with pressure measured in
    /// velocity units: a pressure checkerboard of amplitude `4 mu / h` has the
    /// same momentum residual as a unit velocity checkerboard.
    fn checkerboard_energy(e: &BlockVector, p_scale: f64) -> f64 {
        let level = e.level();
        let mut c = [0.0f64; 3];
        let mut count = [0usize; 3];
        for idx in 0..level.len() {
            if level.is_boundary(idx) {
                continue;
            }
            let (k, i, j) = match level.decode(idx) {
                Dof::U1 { i, j } => (0, i, j),
                Dof::U2 { i, j } => (1, i, j),
                Dof::P { i, j } => (2, i, j),
            };
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            c[k] += sign * e.data()[idx];
            count[k] += 1;
        }
        c[2] /= p_scale;
        (0..3).map(|k| (c[k] / count[k] as f64).powi(2)).sum()
    }

    #[test]
    fn wrapped_sweeps_damp_the_highest_frequency() {
        let sys = stokes_level(64);
        let level = *sys.level();
        let p_scale = 4.0 * sys.params().mu / level.h();
        for kind in [SmootherKind::Ras, SmootherKind::Rms, SmootherKind::Sc] {
            let sm = LevelSmoother::new(&sys, &SmootherConfig::new(kind)).unwrap();
            let mut e = random(&level, 21);
            let cb = BlockVector::from_fn(&level, |d, _, _| match d {
                Dof::U1 { i, j } | Dof::U2 { i, j } => (-1.0f64).powi((i + j) as i32),
                Dof::P { i, j } => (-1.0f64).powi((i + j) as i32),
            });
            e.axpy(1.0, &cb).unwrap();
            for v in e.pressure_mut() {
                *v *= p_scale;
            }
            e.zero_boundary();
            e.project_mean_pressure();
            let before = checkerboard_energy(&e, p_scale);
            let b = BlockVector::zeros(&level);
            sm.smooth(&sys, &mut e, &b, 2, 2).unwrap();
            let after = checkerboard_energy(&e, p_scale);
            assert!(after * 2.0 <= before, "{kind}: {before:e} -> {after:e}");
        }
    }

    #[test]
    fn wrap_never_increases_the_residual() {
        let sys = stokes_level(32);
        let level = *sys.level();
        let b = random(&level, 1);
        for kind in [SmootherKind::Ras, SmootherKind::Rms, SmootherKind::Sc] {
            let sm = LevelSmoother::new(&sys, &SmootherConfig::schwarz(kind, 8, 1)).unwrap();
            for wrap in 1..=3 {
                let mut w = random(&level, 2);
                let r0 = sys.residual(&w, &b).unwrap().norm();
                sm.smooth(&sys, &mut w, &b, 1, wrap).unwrap();
                let r1 = sys.residual(&w, &b).unwrap().norm();
                assert!(r1 <= r0 * (1.0 + 1e-12), "{kind} wrap {wrap}");
            }
        }
    }

    #[test]
    fn zero_sweeps_are_rejected() {
        let sys = stokes_level(16);
        let sm = LevelSmoother::new(&sys, &SmootherConfig::new(SmootherKind::Ras)).unwrap();
        let mut w = BlockVector::zeros(sys.level());
        let b = w.clone();
        assert!(sm.smooth(&sys, &mut w, &b, 0, 2).is_err());
    }

    #[test]
    fn additive_sweep_is_thread_count_independent() {
        let sys = stokes_level(32);
        let level = *sys.level();
        let sm = LevelSmoother::new(&sys, &SmootherConfig::schwarz(SmootherKind::Ras, 4, 2)).unwrap();
        let b = random(&level, 3);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut w = random(&level, 4);
                sm.smooth(&sys, &mut w, &b, 2, 2).unwrap();
                w
            })
        };
        let one = run(1);
        assert_eq!(one.data(), run(4).data());
    }

    #[test]
    fn multiplicative_sweep_beats_additive_on_stiff_shell() {
        let p = ProblemSpec::new(Geometry::Thick, 64, 500.0, 1.0, 0.0).build().unwrap();
        let u0 = BlockVector::zeros(p.grid.finest());
        let step = crate::driver::assemble_step(&p, &p.structure, &u0).unwrap();
        let sys = step.hierarchy.finest();
        let level = *sys.level();
        let exact = random(&level, 8);
        let b = sys.apply(&exact).unwrap();
        let err = |kind| {
            let sm = LevelSmoother::new(sys, &SmootherConfig::new(kind)).unwrap();
            let mut w = BlockVector::zeros(&level);
            sm.apply(sys, w.data_mut(), b.data());
            w.axpy(-1.0, &exact).unwrap();
            w.project_mean_pressure();
            w.norm() / exact.norm()
        };
        let (ras, rms) = (err(SmootherKind::Ras), err(SmootherKind::Rms));
        assert!(rms <= ras, "RMS {rms:e} RAS {ras:e}");
    }
}
