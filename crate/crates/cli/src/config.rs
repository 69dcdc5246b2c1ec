use std::path::{Path, PathBuf};

use ibmg_core::fiber::Geometry;
use ibmg_core::smoothers::SmootherKind;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// A key that takes either one value or a list of values to sweep over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl<T> From<T> for OneOrMany<T> {
    fn from(v: T) -> Self {
        OneOrMany::One(v)
    }
}

/// Experiment description as read from a TOML file. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: OneOrMany<String>,
    #[serde(rename = "N")]
    pub n: OneOrMany<usize>,
    pub gamma: OneOrMany<f64>,
    pub mu: OneOrMany<f64>,
    pub rho: OneOrMany<f64>,
    pub smoother: OneOrMany<String>,
    #[serde(rename = "box")]
    pub box_size: OneOrMany<usize>,
    pub overlap: OneOrMany<usize>,
    pub nu1: usize,
    pub nu2: usize,
    /// FGMRES steps wrapped around each smoother application.
    pub wrap: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Suspension placement seed.
    pub seed: u64,
    /// Write measured wall times; with `false` the column is 0 and output is
    /// byte-reproducible.
    pub record_timing: bool,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            problem: "thick".to_string().into(),
            n: 64.into(),
            gamma: 5.0.into(),
            mu: 1.0.into(),
            rho: 0.0.into(),
            smoother: "SC".to_string().into(),
            box_size: 8.into(),
            overlap: 2.into(),
            nu1: 1,
            nu2: 1,
            wrap: 2,
            tol: 1e-12,
            max_iters: 100,
            seed: 0,
            record_timing: true,
            output_dir: PathBuf::from("ibmg-out"),
        }
    }
}

/// One fully specified run of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPoint {
    pub problem: Geometry,
    pub n: usize,
    pub gamma: f64,
    pub mu: f64,
    pub rho: f64,
    pub smoother: SmootherKind,
    pub box_size: usize,
    pub overlap: usize,
    pub nu1: usize,
    pub nu2: usize,
    pub wrap: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        for key in [
            ("problem", self.problem.values().len()),
            ("N", self.n.values().len()),
            ("gamma", self.gamma.values().len()),
            ("mu", self.mu.values().len()),
            ("rho", self.rho.values().len()),
            ("smoother", self.smoother.values().len()),
            ("box", self.box_size.values().len()),
            ("overlap", self.overlap.values().len()),
        ] {
            if key.1 == 0 {
                return bad(format!("'{}' has an empty list", key.0));
            }
        }
        for p in self.problem.values() {
            p.parse::<Geometry>().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        for s in self.smoother.values() {
            s.parse::<SmootherKind>().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        for n in self.n.values() {
            if n % 8 != 0 || !(n / 8).is_power_of_two() {
                return bad(format!("N = {n} is not 8 * 2^k"));
            }
        }
        if self.gamma.values().iter().any(|&g| !(g >= 0.0)) {
            return bad("gamma must be >= 0".into());
        }
        if self.mu.values().iter().any(|&m| !(m > 0.0)) {
            return bad("mu must be > 0".into());
        }
        if self.rho.values().iter().any(|&r| !(r >= 0.0)) {
            return bad("rho must be >= 0".into());
        }
        if self.box_size.values().contains(&0) {
            return bad("box must be > 0".into());
        }
        if self.nu1 + self.nu2 == 0 {
            return bad("nu1 + nu2 must be > 0".into());
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return bad("need tol > 0 and max_iters > 0".into());
        }
        Ok(())
    }

    /// Cartesian product of the sweep keys, `problem` outermost and `overlap`
    /// innermost. Box and overlap do not apply to the SC smoother, which only
    /// takes their first values.
    pub fn points(&self) -> Vec<RunPoint> {
        let mut out = Vec::new();
        for problem in self.problem.values() {
            let problem: Geometry = problem.parse().expect("validated");
            for &n in &self.n.values() {
                for &gamma in &self.gamma.values() {
                    for &mu in &self.mu.values() {
                        for &rho in &self.rho.values() {
                            for s in self.smoother.values() {
                                let smoother: SmootherKind = s.parse().expect("validated");
                                let (boxes, overlaps) = if smoother == SmootherKind::Sc {
                                    (vec![self.box_size.values()[0]], vec![self.overlap.values()[0]])
                                } else {
                                    (self.box_size.values(), self.overlap.values())
                                };
                                for &box_size in &boxes {
                                    for &overlap in &overlaps {
                                        out.push(RunPoint {
                                            problem,
                                            n,
                                            gamma,
                                            mu,
                                            rho,
                                            smoother,
                                            box_size,
                                            overlap,
                                            nu1: self.nu1,
                                            nu2: self.nu2,
                                            wrap: self.wrap,
                                            tol: self.tol,
                                            max_iters: self.max_iters,
                                            seed: self.seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
