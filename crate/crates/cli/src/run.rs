use std::fmt::Write as _;
use std::path::Path;

use ibmg_core::driver::{semi_implicit_step, ProblemSpec, SolverConfig, StepOutcome};
use ibmg_core::multigrid::MultigridConfig;
use ibmg_core::smoothers::SmootherConfig;
use ibmg_core::{BlockVector, IbmgError};
use rayon::prelude::*;

use crate::config::{Config, RunPoint};
use crate::HarnessError;

pub const SUMMARY_HEADER: &str =
    "problem,N,gamma,mu,rho,smoother,box,overlap,nu1,nu2,wrap,iterations,converged,final_relres,wall_time_s";
pub const RESIDUALS_HEADER: &str = "run_id,iter,relres";

/// Result of one sweep point.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub point: RunPoint,
    pub iterations: usize,
    pub converged: bool,
    pub final_relres: f64,
    pub wall_time_s: f64,
    pub history: Vec<f64>,
}

impl RunRecord {
    pub fn from_outcome(point: &RunPoint, out: &StepOutcome) -> Self {
        Self {
            point: point.clone(),
            iterations: out.report.iterations,
            converged: out.report.converged,
            final_relres: out.report.final_relres,
            wall_time_s: out.report.wall_time_s,
            history: out.report.residual_history.clone(),
        }
    }

    pub fn summary_line(&self, record_timing: bool) -> String {
        let p = &self.point;
        let time = if record_timing { self.wall_time_s } else { 0.0 };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.16e},{:.6}",
            p.problem.name(),
            p.n,
            p.gamma,
            p.mu,
            p.rho,
            p.smoother,
            p.box_size,
            p.overlap,
            p.nu1,
            p.nu2,
            p.wrap,
            self.iterations,
            self.converged,
            self.final_relres,
            time
        )
    }
}

impl RunPoint {
    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec::new(self.problem, self.n, self.gamma, self.mu, self.rho).with_seed(self.seed)
    }

    pub fn multigrid(&self) -> MultigridConfig {
        let smoother = SmootherConfig::schwarz(self.smoother, self.box_size, self.overlap).with_wrap(self.wrap);
        MultigridConfig {
            nu1: self.nu1,
            nu2: self.nu2,
            ..MultigridConfig::new(smoother)
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

/// Builds the problem and takes one step from rest.
pub fn step_point(point: &RunPoint) -> Result<StepOutcome, IbmgError> {
    let problem = point.problem_spec().build()?;
    let u0 = BlockVector::zeros(problem.grid.finest());
    semi_implicit_step(&problem, &problem.structure, &u0, point.multigrid(), &point.solver())
}

/// Runs one point. A Krylov breakdown is a scientific outcome and is recorded
/// as a non-converged run; setup errors are returned.
pub fn run_point(point: &RunPoint) -> Result<RunRecord, HarnessError> {
    log::info!("running {point:?}");
    match step_point(point) {
        Ok(out) => Ok(RunRecord::from_outcome(point, &out)),
        Err(IbmgError::Breakdown(it)) => Ok(RunRecord {
            point: point.clone(),
            iterations: it,
            converged: false,
            final_relres: f64::NAN,
            wall_time_s: 0.0,
            history: Vec::new(),
        }),
        Err(e) => Err(HarnessError::Solver(e)),
    }
}

/// Parallelism of a sweep.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Sweep points run concurrently.
    pub jobs: usize,
    /// Threads available to each point's smoothers; `None` uses rayon's default.
    pub threads: Option<usize>,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))
}

/// Runs every point; records come back in sweep order whatever `jobs` is.
pub fn run_sweep(cfg: &Config, opts: RunOptions) -> Result<Vec<RunRecord>, HarnessError> {
    let points = cfg.points();
    let one = |p: &RunPoint| -> Result<RunRecord, HarnessError> {
        match opts.threads {
            Some(t) => pool(t)?.install(|| run_point(p)),
            None => run_point(p),
        }
    };
    if opts.jobs <= 1 {
        points.iter().map(one).collect()
    } else {
        pool(opts.jobs)?.install(|| points.par_iter().map(one).collect())
    }
}

pub fn summary_csv(records: &[RunRecord], record_timing: bool) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.summary_line(record_timing));
        s.push('\n');
    }
    s
}

pub fn residuals_csv(records: &[RunRecord]) -> String {
    let mut s = String::from(RESIDUALS_HEADER);
    s.push('\n');
    for (id, r) in records.iter().enumerate() {
        for (it, v) in r.history.iter().enumerate() {
            writeln!(s, "{id},{it},{v:.16e}").unwrap();
        }
    }
    s
}

/// Writes `summary.csv` and `residuals.csv` into `dir`.
pub fn write_outputs(dir: &Path, records: &[RunRecord], record_timing: bool) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    for (name, body) in [
        ("summary.csv", summary_csv(records, record_timing)),
        ("residuals.csv", residuals_csv(records)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| HarnessError::Io(path, e))?;
    }
    Ok(())
}

/// Runs the sweep and writes both CSVs to the configured output directory.
pub fn run_experiment(cfg: &Config, opts: RunOptions) -> Result<Vec<RunRecord>, HarnessError> {
    let records = run_sweep(cfg, opts)?;
    write_outputs(&cfg.output_dir, &records, cfg.record_timing)?;
    Ok(records)
}
