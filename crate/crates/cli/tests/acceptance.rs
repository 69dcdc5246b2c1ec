//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p ibmg --test acceptance`; pass criterion
//! numbers as arguments (`-- 2 3`) to run a subset. The process fails if any
//! criterion fails that is not listed in `KNOWN_FAILURES`.

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ibmg::config::{Config, OneOrMany};
use ibmg::{run_sweep, RunOptions, RunRecord};
use ibmg_core::coupling::{phi, CouplingOperators};
use ibmg_core::driver::{assemble_step, semi_implicit_step, ProblemSpec, SolverConfig};
use ibmg_core::fiber::{flatten, Geometry};
use ibmg_core::multigrid::MultigridConfig;
use ibmg_core::operators::{apply_a, assemble_a, assemble_d, assemble_g, FluidParams};
use ibmg_core::smoothers::{SchurSmoother, SmootherConfig, SmootherKind};
use ibmg_core::sparse::CsrMatrix;
use ibmg_core::system::LevelSystem;
use ibmg_core::transfer::{velocity_prolongation_matrix, velocity_restriction_matrix};
use ibmg_core::{BlockVector, Dof, StaggeredLevel};
use ibmg_oracle::{dense_eq10, dense_solve, eq10_rhs, Fibers, Grid};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail with the faithful implementation; see the README.
const KNOWN_FAILURES: [u32; 2] = [5, 7];

const GEOMETRIES: [Geometry; 3] = [Geometry::Thick, Geometry::Thin, Geometry::Suspension];

type Verdict = (bool, String);

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "elimination correctness", c1_elimination),
        (2, "adjointness and symmetry", c2_adjointness),
        (3, "kernel suite", c3_kernel),
        (4, "exact Schur factorization", c4_exact_schur),
        (5, "scalability trend", c5_scalability),
        (6, "robustness boundary", c6_robustness),
        (7, "overlap sensitivity, thin membrane", c7_overlap),
        (8, "additive vs multiplicative ordering", c8_ordering),
        (9, "determinism", c9_determinism),
        (10, "stencil consistency", c10_stencils),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = run();
        let status = if pass { "PASS" } else { "FAIL" };
        let note = match (pass, KNOWN_FAILURES.contains(&id)) {
            (false, true) => " (known failure)",
            (true, true) => " (known failure now passes)",
            _ => "",
        };
        println!(
            "criterion {id:>2} [{name}]: {status}{note} ({:.1} s) {detail}",
            t.elapsed().as_secs_f64()
        );
        if !pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}

fn sweep(cfg: Config) -> Vec<RunRecord> {
    run_sweep(&cfg, RunOptions::default()).expect("sweep runs")
}

fn many<T: Clone>(v: &[T]) -> OneOrMany<T> {
    OneOrMany::Many(v.to_vec())
}

fn dense_vec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn c1_elimination() -> Verdict {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for geom in GEOMETRIES {
        let p = ProblemSpec::new(geom, 16, 50.0, 0.1, 1.0).build().unwrap();
        let grid = Grid::new(16);
        let fibers = Fibers::from_structure(&p.structure);
        let m = dense_eq10(grid, &p.params, &fibers).unwrap();
        let b = eq10_rhs(grid, &p.params, p.bc.lid_speed, &vec![0.0; grid.len()], &fibers);
        let idx = grid.unknowns();
        let pressure: Vec<usize> = (0..idx.len()).filter(|&k| idx[k] >= grid.n_velocity()).collect();
        let z = dense_solve(&m, &b, &pressure).unwrap();
        let mut w_ref = DVector::zeros(grid.len());
        for (r, &g) in idx.iter().enumerate() {
            w_ref[g] = z[r];
        }
        let x_ref = z.rows(idx.len(), z.len() - idx.len()).into_owned();

        let u0 = BlockVector::zeros(p.grid.finest());
        let cfg = MultigridConfig::new(SmootherConfig::new(SmootherKind::Rms));
        let out = semi_implicit_step(&p, &p.structure, &u0, cfg, &SolverConfig::default()).unwrap();
        let mut w = out.solution.clone();
        w.project_mean_pressure();
        let ew = rel(&dense_vec(w.data()), &w_ref);
        let ex = rel(&dense_vec(&flatten(&out.positions)), &x_ref);
        worst = worst.max(ew).max(ex);
    }
    let secs = t.elapsed().as_secs_f64();
    (worst <= 1e-10 && secs < 10.0, format!("max rel diff {worst:.2e}"))
}

fn random_unknowns(level: &StaggeredLevel, rng: &mut ChaCha8Rng) -> BlockVector {
    let mut v = BlockVector::from_fn(level, |_, _, _| rng.random_range(-1.0..1.0));
    v.zero_boundary();
    v
}

fn frob(m: &CsrMatrix) -> f64 {
    m.triplets().map(|(_, _, v)| v * v).sum::<f64>().sqrt()
}

fn c2_adjointness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut adj = 0.0f64;
    let mut asym = 0.0f64;
    for geom in GEOMETRIES {
        let p = ProblemSpec::new(geom, 64, 50.0, 1.0, 0.0).build().unwrap();
        let level = *p.grid.finest();
        let ops = CouplingOperators::new(&level, &p.structure).unwrap();
        let weights = p.structure.weights();
        let h2 = level.h() * level.h();
        for _ in 0..100 {
            let f: Vec<[f64; 2]> = (0..weights.len())
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let u = random_unknowns(&level, &mut rng);
            let sf = ops.spread(&f).unwrap();
            let ju = ops.interpolate(&u).unwrap();
            let terms: Vec<f64> = sf.data().iter().zip(u.data()).map(|(a, b)| h2 * a * b).collect();
            let lhs: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            let rhs: f64 = f
                .iter()
                .zip(&ju)
                .zip(&weights)
                .map(|((a, b), w)| w * (a[0] * b[0] + a[1] * b[1]))
                .sum();
            adj = adj.max((lhs - rhs).abs() / scale);
        }
        let step = assemble_step(&p, &p.structure, &BlockVector::zeros(&level)).unwrap();
        for l in 0..step.hierarchy.n_levels() {
            let e = step.hierarchy.level(l).e();
            asym = asym.max(frob(&e.add_scaled(1.0, &e.transpose(), -1.0)) / frob(e));
        }
    }
    let coarse = StaggeredLevel::new(0, 8);
    let fine = StaggeredLevel::new(1, 16);
    let r = velocity_restriction_matrix(&coarse, &fine).unwrap();
    let pt = velocity_prolongation_matrix(&coarse, &fine, false).unwrap().transpose().scale(0.25);
    let ru_diff = r.add_scaled(1.0, &pt, -1.0).max_abs();
    let pass = adj <= 1e-13 && asym <= 1e-12 && ru_diff == 0.0;
    (pass, format!("adjointness {adj:.1e}, SKJ asymmetry {asym:.1e} (all levels), |R_u - P_u*| {ru_diff:e}"))
}

fn c3_kernel() -> Verdict {
    let values = phi(0.0) == 0.5 && phi(1.0) == 0.25 && phi(2.0) == 0.0 && phi(2.7) == 0.0 && phi(-3.0) == 0.0;
    let mut even = 0.0f64;
    let mut unity = 0.0f64;
    let mut moment = 0.0f64;
    for k in 0..=1000 {
        let r = k as f64 / 1000.0;
        even = even.max((phi(r * 2.5) - phi(-r * 2.5)).abs());
        let sum: f64 = (-3..=3).map(|i| phi(r - i as f64)).sum();
        let m1: f64 = (-3..=3).map(|i| (r - i as f64) * phi(r - i as f64)).sum();
        unity = unity.max((sum - 1.0).abs());
        moment = moment.max(m1.abs());
    }
    let pass = values && even == 0.0 && unity <= 1e-14 && moment <= 1e-13;
    (pass, format!("values ok {values}, evenness {even:e}, unity {unity:.1e}, first moment {moment:.1e}"))
}

fn c4_exact_schur() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for geom in GEOMETRIES {
        for rho in [0.0, 1.0] {
            let p = ProblemSpec::new(geom, 16, 500.0, 1.0, rho).build().unwrap();
            let step = assemble_step(&p, &p.structure, &BlockVector::zeros(p.grid.finest())).unwrap();
            let sys: &LevelSystem = step.hierarchy.finest();
            let sc = SchurSmoother::exact(sys).unwrap();
            let mut b = random_unknowns(sys.level(), &mut rng);
            b.project_mean_pressure();
            let mut w = vec![0.0; b.data().len()];
            sc.apply(sys, &mut w, b.data());
            let w = BlockVector::from_data(sys.level(), w).unwrap();
            let mut r = sys.residual(&w, &b).unwrap();
            r.zero_boundary();
            worst = worst.max(r.norm() / b.norm());
        }
    }
    (worst <= 1e-10, format!("max relative residual after one application {worst:.2e}"))
}

fn c5_scalability() -> Verdict {
    let base = Config {
        problem: OneOrMany::One("thick".into()),
        n: many(&[64, 128, 256]),
        gamma: many(&[5.0, 50.0]),
        mu: OneOrMany::One(1.0),
        rho: OneOrMany::One(0.0),
        smoother: many(&["SC".to_string(), "RMS".to_string()]),
        box_size: OneOrMany::One(8),
        overlap: OneOrMany::One(2),
        ..Config::default()
    };
    let recs = sweep(base);
    let mut table: BTreeMap<(String, u64), Vec<(usize, usize, bool)>> = BTreeMap::new();
    for r in &recs {
        table
            .entry((r.point.smoother.to_string(), r.point.gamma as u64))
            .or_default()
            .push((r.point.n, r.iterations, r.converged));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for ((s, g), rows) in &table {
        let base = rows[0].1 as f64;
        let worst = rows.iter().map(|r| r.1 as f64 / base).fold(0.0, f64::max);
        pass &= rows.iter().all(|r| r.2) && worst <= 1.5;
        let its: Vec<String> = rows.iter().map(|r| format!("{}{}", r.1, if r.2 { "" } else { "!" })).collect();
        parts.push(format!("{s} g={g}: {} (x{worst:.2})", its.join("/")));
    }
    (pass, format!("iterations N=64/128/256: {}", parts.join("; ")))
}

fn c6_robustness() -> Verdict {
    let grid = Config {
        problem: OneOrMany::One("thick".into()),
        n: OneOrMany::One(256),
        gamma: many(&[5.0, 50.0, 500.0]),
        mu: many(&[1.0, 0.1, 0.01]),
        rho: OneOrMany::One(1.0),
        smoother: OneOrMany::One("SC".into()),
        ..Config::default()
    };
    let failing = Config {
        gamma: OneOrMany::One(500.0),
        mu: OneOrMany::One(0.001),
        ..grid.clone()
    };
    let recs = sweep(grid);
    let worst = recs.iter().map(|r| r.iterations).max().unwrap();
    let bad: Vec<String> = recs
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("g={} mu={}", r.point.gamma, r.point.mu))
        .collect();
    let f = &sweep(failing)[0];
    let pass = bad.is_empty() && !f.converged && f.iterations == 100;
    (
        pass,
        format!(
            "N=256: 9 convergent cells, max {worst} iterations, non-converged {bad:?}; mu=0.001 g=500: {} iterations, converged {}",
            f.iterations, f.converged
        ),
    )
}

fn c7_overlap() -> Verdict {
    let cfg = Config {
        problem: OneOrMany::One("thin".into()),
        n: OneOrMany::One(128),
        gamma: OneOrMany::One(500.0),
        mu: OneOrMany::One(1.0),
        rho: OneOrMany::One(0.0),
        smoother: many(&["RAS".to_string(), "RMS".to_string()]),
        box_size: many(&[4, 8, 16]),
        overlap: many(&[0, 4]),
        ..Config::default()
    };
    let recs = sweep(cfg);
    let its = |s: SmootherKind, b: usize, o: usize| {
        recs.iter()
            .find(|r| r.point.smoother == s && r.point.box_size == b && r.point.overlap == o)
            .map(|r| r.iterations)
            .unwrap()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for b in [4, 8, 16] {
        let (a0, a4) = (its(SmootherKind::Ras, b, 0), its(SmootherKind::Ras, b, 4));
        let (m0, m4) = (its(SmootherKind::Rms, b, 0), its(SmootherKind::Rms, b, 4));
        pass &= a4 < a0 && m4 < m0;
        pass &= (a4 as f64 - m4 as f64).abs() <= 0.2 * a4.max(m4) as f64;
        parts.push(format!("box {b}: RAS {a0}->{a4}, RMS {m0}->{m4}"));
    }
    let converged = recs.iter().filter(|r| r.converged).count();
    (
        pass,
        format!("iterations overlap 0->4: {}; {converged}/{} runs converged", parts.join("; "), recs.len()),
    )
}

fn c8_ordering() -> Verdict {
    let mut violations = Vec::new();
    let mut cells = 0;
    let mut rms_total = 0;
    let mut ras_total = 0;
    for (mu, rho) in [(1.0, 0.0), (1.0, 1.0), (0.1, 1.0), (0.01, 1.0)] {
        let cfg = Config {
            problem: OneOrMany::One("thick".into()),
            n: OneOrMany::One(128),
            gamma: OneOrMany::One(500.0),
            mu: OneOrMany::One(mu),
            rho: OneOrMany::One(rho),
            smoother: many(&["RAS".to_string(), "RMS".to_string()]),
            box_size: many(&[4, 8, 16]),
            overlap: many(&[0, 2, 4]),
            ..Config::default()
        };
        let recs = sweep(cfg);
        for ras in recs.iter().filter(|r| r.point.smoother == SmootherKind::Ras) {
            let rms = recs
                .iter()
                .find(|r| {
                    r.point.smoother == SmootherKind::Rms
                        && r.point.box_size == ras.point.box_size
                        && r.point.overlap == ras.point.overlap
                })
                .unwrap();
            if !ras.converged && !rms.converged {
                continue;
            }
            cells += 1;
            if ras.converged && rms.converged {
                rms_total += rms.iterations;
                ras_total += ras.iterations;
            }
            if !rms.converged || rms.iterations > ras.iterations + 2 {
                violations.push(format!(
                    "mu={mu} rho={rho} box {} ov {}: RMS {} vs RAS {}",
                    ras.point.box_size, ras.point.overlap, rms.iterations, ras.iterations
                ));
            }
        }
    }
    (
        violations.is_empty(),
        format!("{cells} converged cells, total iterations RMS {rms_total} vs RAS {ras_total}, violations {violations:?}"),
    )
}

fn c9_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "problem = [\"thick\", \"suspension\"]\nN = 64\ngamma = 50\nsmoother = [\"RAS\", \"SC\"]\nrecord_timing = false\n",
    )
    .unwrap();
    let run = |threads: &str, tag: &str| -> Option<(Vec<u8>, Vec<u8>)> {
        let out = dir.path().join(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_ibmg"))
            .args(["run", cfg.to_str()?, "--out", out.to_str()?])
            .env("IBMG_THREADS", threads)
            .output()
            .ok()?
            .status;
        if !status.success() {
            return None;
        }
        Some((std::fs::read(out.join("summary.csv")).ok()?, std::fs::read(out.join("residuals.csv")).ok()?))
    };
    let runs = [run("1", "a"), run("1", "b"), run("4", "c"), run("4", "d")];
    let all_ok = runs.iter().all(Option::is_some);
    let same = all_ok && runs.windows(2).all(|w| w[0] == w[1]);
    (same, format!("4 runs (IBMG_THREADS 1,1,4,4), CSVs byte-identical: {same}"))
}

fn c10_stencils() -> Verdict {
    let params = FluidParams::new(0.0, 1.0, 0.01).unwrap();
    let f = |x: f64, y: f64| (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).sin();
    let lap_exact = 8.0 * std::f64::consts::PI.powi(2);
    let mut errs = Vec::new();
    for n in [16, 32, 64, 128] {
        let l = StaggeredLevel::new(0, n);
        let u = BlockVector::from_fn(&l, |dof, x, y| if matches!(dof, Dof::P { .. }) { 0.0 } else { f(x, y) });
        let au = apply_a(&params, &l, &u).unwrap();
        let err = (0..l.n_velocity())
            .filter(|&k| !l.is_boundary(k))
            .map(|k| {
                let (x, y) = l.position(k);
                (au.data()[k] - lap_exact * f(x, y)).abs()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let order_ok = ratios.iter().all(|r| (3.5..=4.5).contains(r));

    let l = StaggeredLevel::new(0, 64);
    let params = FluidParams::new(1.0, 0.1, 0.005).unwrap();
    let a = assemble_a(&params, &l);
    let a_sym = a.asymmetry() / a.max_abs();
    let g = assemble_g(&l);
    let duality = g.add_scaled(1.0, &assemble_d(&l).transpose(), 1.0).max_abs() / g.max_abs();
    let pass = order_ok && a_sym <= 1e-15 && duality <= 1e-15;
    (
        pass,
        format!("Laplacian error ratios {ratios:.3?}, A asymmetry {a_sym:.1e}, |G + D^T| {duality:.1e}"),
    )
}
