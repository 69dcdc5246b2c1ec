//! Second-order staggered finite-difference operators for the cavity problem.
//!
//! * `A = (rho/dt) I - mu Lap_h` acting on both velocity components,
//! * `G = grad_h` from cell centers to faces,
//! * `D = div_h` from faces to cell centers.
//!
//! Walls are no-slip. Normal velocities on the wall are stored boundary faces;
//! tangential wall values enter through a ghost value `2 g - u_interior`. All
//! operators here are the homogeneous ones (`g = 0`); the moving lid only enters
//! through [`build_rhs`]. Operator outputs are zero on boundary faces.

use crate::error::{IbmgError, Result};
use crate::grid::{BlockVector, StaggeredLevel};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    /// Mass density; zero selects Stokes flow.
    pub rho: f64,
    /// Dynamic viscosity.
    pub mu: f64,
    /// Time step size.
    pub dt: f64,
}

impl FluidParams {
    pub fn new(rho: f64, mu: f64, dt: f64) -> Result<Self> {
        if !(mu > 0.0) || !(dt > 0.0) || !(rho >= 0.0) {
            return Err(IbmgError::InvalidConfig(format!(
                "fluid parameters need mu > 0, dt > 0, rho >= 0 (got rho={rho}, mu={mu}, dt={dt})"
            )));
        }
        Ok(Self { rho, mu, dt })
    }

    /// Coefficient of the identity term in `A`.
    pub fn mass_coefficient(&self) -> f64 {
        self.rho / self.dt
    }
}

/// Regularized lid-driven cavity: `u(x, 1) = lid * (1 - cos(2 pi x)) / 2`, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityBC {
    pub lid_speed: f64,
}

impl CavityBC {
    pub fn regularized() -> Self {
        Self { lid_speed: 1.0 }
    }

    pub fn at_rest() -> Self {
        Self { lid_speed: 0.0 }
    }

    pub fn lid_velocity(&self, x: f64) -> f64 {
        self.lid_speed * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * x).cos())
    }
}

fn check_level(level: &StaggeredLevel, v: &BlockVector) -> Result<()> {
    level.check_same(v.level())
}

/// `A u` on interior faces; reads stored normal-direction boundary faces.
pub fn apply_a(params: &FluidParams, level: &StaggeredLevel, u: &BlockVector) -> Result<BlockVector> {
    check_level(level, u)?;
    let n = level.n();
    let inv_h2 = 1.0 / (level.h() * level.h());
    let c = params.mass_coefficient();
    let mu = params.mu;
    let mut out = BlockVector::zeros(level);
    let d = u.data();
    let o = out.data_mut();

    for j in 0..n {
        for i in 1..n {
            let k = level.u1(i, j);
            let uc = d[k];
            let xs = d[level.u1(i + 1, j)] + d[level.u1(i - 1, j)] - 2.0 * uc;
            let up = if j + 1 < n { d[level.u1(i, j + 1)] } else { -uc };
            let dn = if j > 0 { d[level.u1(i, j - 1)] } else { -uc };
            let ys = up + dn - 2.0 * uc;
            o[k] = c * uc - mu * (xs + ys) * inv_h2;
        }
    }
    for j in 1..n {
        for i in 0..n {
            let k = level.u2(i, j);
            let uc = d[k];
            let ys = d[level.u2(i, j + 1)] + d[level.u2(i, j - 1)] - 2.0 * uc;
            let rt = if i + 1 < n { d[level.u2(i + 1, j)] } else { -uc };
            let lt = if i > 0 { d[level.u2(i - 1, j)] } else { -uc };
            let xs = rt + lt - 2.0 * uc;
            o[k] = c * uc - mu * (xs + ys) * inv_h2;
        }
    }
    Ok(out)
}

/// `G p` on interior faces; boundary faces are zero.
pub fn apply_g(level: &StaggeredLevel, p: &BlockVector) -> Result<BlockVector> {
    check_level(level, p)?;
    let n = level.n();
    let inv_h = 1.0 / level.h();
    let mut out = BlockVector::zeros(level);
    let d = p.data();
    let o = out.data_mut();
    for j in 0..n {
        for i in 1..n {
            o[level.u1(i, j)] = (d[level.p(i, j)] - d[level.p(i - 1, j)]) * inv_h;
        }
    }
    for j in 1..n {
        for i in 0..n {
            o[level.u2(i, j)] = (d[level.p(i, j)] - d[level.p(i, j - 1)]) * inv_h;
        }
    }
    Ok(out)
}

/// `D u` at cell centers, reading every face including the boundary.
pub fn apply_d(level: &StaggeredLevel, u: &BlockVector) -> Result<BlockVector> {
    check_level(level, u)?;
    let n = level.n();
    let inv_h = 1.0 / level.h();
    let mut out = BlockVector::zeros(level);
    let d = u.data();
    let o = out.data_mut();
    for j in 0..n {
        for i in 0..n {
            o[level.p(i, j)] = (d[level.u1(i + 1, j)] - d[level.u1(i, j)]
                + d[level.u2(i, j + 1)]
                - d[level.u2(i, j)])
                * inv_h;
        }
    }
    Ok(out)
}

/// Assembled `A` on the level's flat index space (unknown rows/columns only).
pub fn assemble_a(params: &FluidParams, level: &StaggeredLevel) -> CsrMatrix {
    let n = level.n();
    let inv_h2 = 1.0 / (level.h() * level.h());
    let c = params.mass_coefficient();
    let mu = params.mu;
    let off = -mu * inv_h2;
    let mut b = TripletBuilder::with_capacity(level.len(), level.len(), 5 * level.n_velocity());
    for j in 0..n {
        for i in 1..n {
            let k = level.u1(i, j);
            let mut diag = 4.0;
            if i + 1 < n {
                b.push(k, level.u1(i + 1, j), off);
            }
            if i > 1 {
                b.push(k, level.u1(i - 1, j), off);
            }
            if j + 1 < n {
                b.push(k, level.u1(i, j + 1), off);
            } else {
                diag += 1.0;
            }
            if j > 0 {
                b.push(k, level.u1(i, j - 1), off);
            } else {
                diag += 1.0;
            }
            b.push(k, k, c + mu * diag * inv_h2);
        }
    }
    for j in 1..n {
        for i in 0..n {
            let k = level.u2(i, j);
            let mut diag = 4.0;
            if j + 1 < n {
                b.push(k, level.u2(i, j + 1), off);
            }
            if j > 1 {
                b.push(k, level.u2(i, j - 1), off);
            }
            if i + 1 < n {
                b.push(k, level.u2(i + 1, j), off);
            } else {
                diag += 1.0;
            }
            if i > 0 {
                b.push(k, level.u2(i - 1, j), off);
            } else {
                diag += 1.0;
            }
            b.push(k, k, c + mu * diag * inv_h2);
        }
    }
    b.build()
}

/// Assembled `G` (velocity rows, pressure columns) on the flat index space.
pub fn assemble_g(level: &StaggeredLevel) -> CsrMatrix {
    let n = level.n();
    let inv_h = 1.0 / level.h();
    let mut b = TripletBuilder::with_capacity(level.len(), level.len(), 2 * level.n_velocity());
    for j in 0..n {
        for i in 1..n {
            let k = level.u1(i, j);
            b.push(k, level.p(i, j), inv_h);
            b.push(k, level.p(i - 1, j), -inv_h);
        }
    }
    for j in 1..n {
        for i in 0..n {
            let k = level.u2(i, j);
            b.push(k, level.p(i, j), inv_h);
            b.push(k, level.p(i, j - 1), -inv_h);
        }
    }
    b.build()
}

/// Assembled `D` (pressure rows, unknown velocity columns) on the flat index space.
pub fn assemble_d(level: &StaggeredLevel) -> CsrMatrix {
    let n = level.n();
    let inv_h = 1.0 / level.h();
    let mut b = TripletBuilder::with_capacity(level.len(), level.len(), 4 * level.n_pressure());
    for j in 0..n {
        for i in 0..n {
            let k = level.p(i, j);
            if i + 1 < n {
                b.push(k, level.u1(i + 1, j), inv_h);
            }
            if i > 0 {
                b.push(k, level.u1(i, j), -inv_h);
            }
            if j + 1 < n {
                b.push(k, level.u2(i, j + 1), inv_h);
            }
            if j > 0 {
                b.push(k, level.u2(i, j), -inv_h);
            }
        }
    }
    b.build()
}

/// Right-hand side of the momentum/continuity system.
///
/// The velocity block is `force + (rho/dt) u_prev` plus the lid lift
/// `2 mu g(x) / h^2` on the top row of x-faces; the pressure block is zero.
pub fn build_rhs(
    params: &FluidParams,
    bc: &CavityBC,
    level: &StaggeredLevel,
    force: &BlockVector,
    u_prev: Option<&BlockVector>,
) -> Result<BlockVector> {
    check_level(level, force)?;
    let n = level.n();
    let mut rhs = BlockVector::zeros(level);
    let nv = level.n_velocity();
    rhs.data_mut()[..nv].copy_from_slice(&force.data()[..nv]);
    if let Some(u) = u_prev {
        check_level(level, u)?;
        let c = params.mass_coefficient();
        for (r, v) in rhs.data_mut()[..nv].iter_mut().zip(&u.data()[..nv]) {
            *r += c * v;
        }
    }
    let inv_h2 = 1.0 / (level.h() * level.h());
    for i in 1..n {
        let (x, _) = level.u1_position(i, n - 1);
        let k = level.u1(i, n - 1);
        rhs.data_mut()[k] += 2.0 * params.mu * bc.lid_velocity(x) * inv_h2;
    }
    rhs.zero_boundary();
    Ok(rhs)
}
