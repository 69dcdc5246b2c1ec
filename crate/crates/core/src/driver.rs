//! Outer FGMRES solve and the semi-implicit immersed-boundary time step.

use std::time::Instant;

use crate::coupling::CouplingOperators;
use crate::error::{IbmgError, Result};
use crate::fiber::{
    make_suspension_with, make_thick_annulus, make_thick_annulus_with, make_thin_membrane,
    Geometry, NodeArray, StiffnessSpec, Structure, SuspensionLayout,
};
use crate::grid::{BlockVector, GridHierarchy};
use crate::krylov::fgmres;
use crate::multigrid::{Multigrid, MultigridConfig};
use crate::operators::{build_rhs, CavityBC, FluidParams};
use crate::system::SystemHierarchy;

/// Time step as a multiple of the finest grid spacing.
pub const CFL: f64 = 0.32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual norms, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub final_relres: f64,
    pub wall_time_s: f64,
    pub multigrid: MultigridConfig,
    pub solver: SolverConfig,
}

/// Solves `L_IB w = b` by FGMRES from a zero guess, right-preconditioned by one V-cycle.
pub fn solve(mg: &Multigrid, b: &BlockVector, cfg: &SolverConfig) -> Result<(BlockVector, SolveReport)> {
    let start = Instant::now();
    let sys = mg.hierarchy().finest();
    sys.level().check_same(b.level())?;
    let level = *sys.level();
    let mut rhs = b.clone();
    rhs.zero_boundary();
    rhs.project_mean_pressure();
    let mut x = BlockVector::zeros(&level);
    let l = sys.matrix();
    let outcome = fgmres(
        |v, out| {
            l.mul_vec_into(v, out);
            Ok(())
        },
        |v, out| {
            let bv = BlockVector::from_data(&level, v.to_vec())?;
            let z = mg.v_cycle(&bv)?;
            out.copy_from_slice(z.data());
            Ok(())
        },
        rhs.data(),
        x.data_mut(),
        cfg.tol,
        cfg.max_iters,
    )?;
    x.project_mean_pressure();
    if !x.is_finite() {
        return Err(IbmgError::Breakdown(outcome.iterations));
    }
    let final_relres = *outcome.history.last().unwrap();
    let report = SolveReport {
        iterations: outcome.iterations,
        converged: final_relres <= cfg.tol,
        final_relres,
        residual_history: outcome.history,
        wall_time_s: start.elapsed().as_secs_f64(),
        multigrid: *mg.config(),
        solver: *cfg,
    };
    Ok((x, report))
}

/// Which benchmark problem to build on an `n x n` finest grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec {
    pub geometry: Geometry,
    pub n: usize,
    pub gamma: f64,
    pub mu: f64,
    pub rho: f64,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(geometry: Geometry, n: usize, gamma: f64, mu: f64, rho: f64) -> Self {
        Self {
            geometry,
            n,
            gamma,
            mu,
            rho,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn alpha(&self) -> f64 {
        StiffnessSpec::new(self.gamma, self.geometry).alpha()
    }

    /// Builds the grid, fluid parameters and immersed structure.
    pub fn build(&self) -> Result<Problem> {
        let grid = GridHierarchy::new(self.n)?;
        let h = grid.finest().h();
        let params = FluidParams::new(self.rho, self.mu, CFL * h)?;
        let alpha = self.alpha();
        let n = self.n;
        let meshes = match self.geometry {
            Geometry::Thick if n.is_multiple_of(32) => vec![make_thick_annulus(n, alpha)?],
            // Coarse grids: keep the node spacing and round the fiber count up.
            Geometry::Thick => vec![make_thick_annulus_with(19 * n / 8, (3 * n).div_ceil(32) + 1, alpha)?],
            Geometry::Thin => vec![make_thin_membrane(n, alpha)?],
            Geometry::Suspension => make_suspension_with(n, self.seed, alpha, suspension_layout(n))?,
        };
        Ok(Problem {
            spec: *self,
            grid,
            params,
            bc: CavityBC::regularized(),
            structure: Structure::new(meshes),
        })
    }
}

/// Suspension clearances: `4h` where the grid allows it, otherwise circles may
/// touch and keep `2h` from the walls.
pub fn suspension_layout(n: usize) -> SuspensionLayout {
    let standard = SuspensionLayout::standard(n);
    if n >= 64 {
        standard
    } else {
        let h = 1.0 / n as f64;
        SuspensionLayout {
            gap_margin: 0.0,
            wall_margin: 2.0 * h,
            ..standard
        }
    }
}

/// A fully specified problem at `t = 0`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub grid: GridHierarchy,
    pub params: FluidParams,
    pub bc: CavityBC,
    pub structure: Structure,
}

/// Linear system of one semi-implicit step with the structure frozen at `X^n`.
#[derive(Debug)]
pub struct StepSystem {
    pub coupling: CouplingOperators,
    pub hierarchy: SystemHierarchy,
    pub rhs: BlockVector,
}

/// Assembles `L_IB` (with `E = S K J` at `X^n`) and `b = (S K X^n + (rho/dt) u^n + lift, 0)`.
pub fn assemble_step(problem: &Problem, structure: &Structure, u_n: &BlockVector) -> Result<StepSystem> {
    let level = *problem.grid.finest();
    let coupling = CouplingOperators::new(&level, structure)?;
    let e = coupling.assemble_skj(&structure.assemble_k());
    let force = coupling.spread(&structure.apply_k(&structure.positions())?)?;
    let rhs = build_rhs(&problem.params, &problem.bc, &level, &force, Some(u_n))?;
    let hierarchy = SystemHierarchy::new(problem.grid.clone(), problem.params, e)?;
    Ok(StepSystem {
        coupling,
        hierarchy,
        rhs,
    })
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// `(u^{n+1}, p^{n+1})`.
    pub solution: BlockVector,
    /// `X^{n+1} = X^n + dt J u^{n+1}`.
    pub positions: NodeArray,
    pub report: SolveReport,
}

/// One semi-implicit step from `(u^n, X^n)`; `structure` holds `X^n`.
pub fn semi_implicit_step(
    problem: &Problem,
    structure: &Structure,
    u_n: &BlockVector,
    mg_cfg: MultigridConfig,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    let step = assemble_step(problem, structure, u_n)?;
    let mg = Multigrid::new(step.hierarchy, mg_cfg)?;
    let (solution, report) = solve(&mg, &step.rhs, solver)?;
    let positions = advance_positions(&step.coupling, structure, &solution, problem.params.dt)?;
    Ok(StepOutcome {
        solution,
        positions,
        report,
    })
}

/// `X^n + dt J u`.
pub fn advance_positions(
    coupling: &CouplingOperators,
    structure: &Structure,
    u: &BlockVector,
    dt: f64,
) -> Result<NodeArray> {
    let uu = coupling.interpolate(u)?;
    Ok(structure
        .positions()
        .iter()
        .zip(&uu)
        .map(|(x, v)| [x[0] + dt * v[0], x[1] + dt * v[1]])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothers::{SmootherConfig, SmootherKind};

    fn mg_cfg(kind: SmootherKind) -> MultigridConfig {
        MultigridConfig::new(SmootherConfig::new(kind))
    }

    #[test]
    fn every_geometry_builds_on_small_grids() {
        for geom in [Geometry::Thick, Geometry::Thin, Geometry::Suspension] {
            for n in [16, 32, 64] {
                let p = ProblemSpec::new(geom, n, 5.0, 1.0, 0.0).build().unwrap();
                assert!(p.structure.node_count() > 0);
                CouplingOperators::new(p.grid.finest(), &p.structure).unwrap();
            }
        }
    }

    #[test]
    fn step_converges_and_moves_nodes_with_the_fluid() {
        let p = ProblemSpec::new(Geometry::Thick, 32, 50.0, 1.0, 0.0).build().unwrap();
        let u0 = BlockVector::zeros(p.grid.finest());
        let out = semi_implicit_step(&p, &p.structure, &u0, mg_cfg(SmootherKind::Sc), &SolverConfig::default())
            .unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.residual_history.len(), out.report.iterations + 1);
        assert!((out.report.residual_history[0] - 1.0).abs() < 1e-12);

        let ops = CouplingOperators::new(p.grid.finest(), &p.structure).unwrap();
        let v = ops.interpolate(&out.solution).unwrap();
        for ((x1, x0), v) in out.positions.iter().zip(p.structure.positions()).zip(v) {
            for d in 0..2 {
                assert!((x1[d] - x0[d] - p.params.dt * v[d]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn solution_satisfies_the_system() {
        let p = ProblemSpec::new(Geometry::Thin, 32, 5.0, 0.1, 1.0).build().unwrap();
        let u0 = BlockVector::zeros(p.grid.finest());
        let step = assemble_step(&p, &p.structure, &u0).unwrap();
        let mg = Multigrid::new(step.hierarchy, mg_cfg(SmootherKind::Rms)).unwrap();
        let (x, report) = solve(&mg, &step.rhs, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let mut r = mg.hierarchy().finest().residual(&x, &step.rhs).unwrap();
        r.zero_boundary();
        r.project_mean_pressure();
        assert!(r.norm() <= 1e-10 * step.rhs.norm());
    }

    #[test]
    fn unstressed_structure_in_quiescent_fluid_stays_put() {
        let mut p = ProblemSpec::new(Geometry::Thick, 32, 0.0, 1.0, 1.0).build().unwrap();
        p.bc = CavityBC::at_rest();
        let u0 = BlockVector::zeros(p.grid.finest());
        let out = semi_implicit_step(&p, &p.structure, &u0, mg_cfg(SmootherKind::Ras), &SolverConfig::default())
            .unwrap();
        assert!(out.solution.velocity().iter().all(|v| v.abs() < 1e-14));
        assert_eq!(out.positions, p.structure.positions());
    }
}
