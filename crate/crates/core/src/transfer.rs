//! Inter-level transfers between a coarse level and the next finer one.
//!
//! Velocity uses lowest-order Raviart-Thomas prolongation (linear in the
//! normal direction, constant in the tangential direction) and its adjoint
//! `R_u = P_u^* = (1/4) P_u^T` under the grid-weighted inner product. Pressure
//! uses bilinear prolongation with linear extrapolation at the walls and
//! restriction by averaging the four child cells.

use crate::error::{IbmgError, Result};
use crate::grid::{BlockVector, StaggeredLevel};
use crate::sparse::{CsrMatrix, TripletBuilder};

fn check_pair(coarse: &StaggeredLevel, fine: &StaggeredLevel) -> Result<()> {
    if fine.n() != 2 * coarse.n() {
        return Err(IbmgError::LevelMismatch {
            expected: 2 * coarse.n(),
            found: fine.n(),
        });
    }
    Ok(())
}

/// Coarse faces (and weights) feeding a fine face index along its normal.
#[inline]
fn normal_stencil(fi: usize) -> [(usize, f64); 2] {
    if fi.is_multiple_of(2) {
        [(fi / 2, 1.0), (fi / 2, 0.0)]
    } else {
        [(fi / 2, 0.5), (fi / 2 + 1, 0.5)]
    }
}

/// Coarse cells (and weights) feeding a fine cell index in one direction.
#[inline]
fn cell_stencil(fi: usize, nc: usize) -> [(usize, f64); 3] {
    let i = fi / 2;
    let nb = if fi.is_multiple_of(2) {
        i.checked_sub(1)
    } else {
        (i + 1 < nc).then_some(i + 1)
    };
    match nb {
        Some(k) => [(i, 0.75), (k, 0.25), (i, 0.0)],
        // Linear extrapolation through the wall: p_ghost = 2 p_i - p_inner.
        None => {
            let inner = if fi.is_multiple_of(2) { i + 1 } else { i - 1 };
            [(i, 1.25), (inner, -0.25), (i, 0.0)]
        }
    }
}

/// Sets the velocity block of `fine` to `P_u` of the coarse velocity block.
fn prolong_velocity_into(coarse: &BlockVector, fine: &mut BlockVector) {
    let cl = *coarse.level();
    let fl = *fine.level();
    let nf = fl.n();
    let c = coarse.data();
    let f = fine.data_mut();
    for jf in 0..nf {
        for i_f in 0..=nf {
            let mut v = 0.0;
            for (ic, w) in normal_stencil(i_f) {
                if w != 0.0 {
                    v += w * c[cl.u1(ic, jf / 2)];
                }
            }
            f[fl.u1(i_f, jf)] = v;
        }
    }
    for jf in 0..=nf {
        for i_f in 0..nf {
            let mut v = 0.0;
            for (jc, w) in normal_stencil(jf) {
                if w != 0.0 {
                    v += w * c[cl.u2(i_f / 2, jc)];
                }
            }
            f[fl.u2(i_f, jf)] = v;
        }
    }
}

/// Sets the velocity block of `coarse` to `R_u` of the fine velocity block.
fn restrict_velocity_into(fine: &BlockVector, coarse: &mut BlockVector) {
    let cl = *coarse.level();
    let fl = *fine.level();
    let nc = cl.n();
    let nf = fl.n();
    let f = fine.data();
    let c = coarse.data_mut();
    for jc in 0..nc {
        for ic in 0..=nc {
            let mut s = 0.0;
            for jf in [2 * jc, 2 * jc + 1] {
                s += f[fl.u1(2 * ic, jf)];
                if ic > 0 {
                    s += 0.5 * f[fl.u1(2 * ic - 1, jf)];
                }
                if ic < nc {
                    s += 0.5 * f[fl.u1(2 * ic + 1, jf)];
                }
            }
            c[cl.u1(ic, jc)] = 0.25 * s;
        }
    }
    for jc in 0..=nc {
        for ic in 0..nc {
            let mut s = 0.0;
            for i_f in [2 * ic, 2 * ic + 1] {
                s += f[fl.u2(i_f, 2 * jc)];
                if jc > 0 {
                    s += 0.5 * f[fl.u2(i_f, 2 * jc - 1)];
                }
                if jc < nc {
                    s += 0.5 * f[fl.u2(i_f, 2 * jc + 1)];
                }
            }
            c[cl.u2(ic, jc)] = 0.25 * s;
        }
    }
    debug_assert_eq!(nf, 2 * nc);
}

fn prolong_pressure_into(coarse: &BlockVector, fine: &mut BlockVector) {
    let cl = *coarse.level();
    let fl = *fine.level();
    let nc = cl.n();
    let nf = fl.n();
    let c = coarse.data();
    let f = fine.data_mut();
    for jf in 0..nf {
        let sy = cell_stencil(jf, nc);
        for i_f in 0..nf {
            let sx = cell_stencil(i_f, nc);
            let mut v = 0.0;
            for &(jc, wy) in &sy {
                if wy == 0.0 {
                    continue;
                }
                for &(ic, wx) in &sx {
                    if wx != 0.0 {
                        v += wx * wy * c[cl.p(ic, jc)];
                    }
                }
            }
            f[fl.p(i_f, jf)] = v;
        }
    }
}

fn restrict_pressure_into(fine: &BlockVector, coarse: &mut BlockVector) {
    let cl = *coarse.level();
    let fl = *fine.level();
    let nc = cl.n();
    let f = fine.data();
    let c = coarse.data_mut();
    for jc in 0..nc {
        for ic in 0..nc {
            let s = f[fl.p(2 * ic, 2 * jc)]
                + f[fl.p(2 * ic + 1, 2 * jc)]
                + f[fl.p(2 * ic, 2 * jc + 1)]
                + f[fl.p(2 * ic + 1, 2 * jc + 1)];
            c[cl.p(ic, jc)] = 0.25 * s;
        }
    }
}

/// `P_u` applied to the velocity block; the fine pressure block is zero.
pub fn prolong_velocity(coarse: &BlockVector, fine: &StaggeredLevel) -> Result<BlockVector> {
    check_pair(coarse.level(), fine)?;
    let mut out = BlockVector::zeros(fine);
    prolong_velocity_into(coarse, &mut out);
    Ok(out)
}

/// `R_u` applied to the velocity block; the coarse pressure block is zero.
pub fn restrict_velocity(fine: &BlockVector, coarse: &StaggeredLevel) -> Result<BlockVector> {
    check_pair(coarse, fine.level())?;
    let mut out = BlockVector::zeros(coarse);
    restrict_velocity_into(fine, &mut out);
    Ok(out)
}

/// Bilinear prolongation of the pressure block; the fine velocity block is zero.
pub fn prolong_pressure(coarse: &BlockVector, fine: &StaggeredLevel) -> Result<BlockVector> {
    check_pair(coarse.level(), fine)?;
    let mut out = BlockVector::zeros(fine);
    prolong_pressure_into(coarse, &mut out);
    Ok(out)
}

/// Four-cell average of the pressure block; the coarse velocity block is zero.
pub fn restrict_pressure(fine: &BlockVector, coarse: &StaggeredLevel) -> Result<BlockVector> {
    check_pair(coarse, fine.level())?;
    let mut out = BlockVector::zeros(coarse);
    restrict_pressure_into(fine, &mut out);
    Ok(out)
}

/// Prolongs both blocks (used for the coarse-grid correction).
pub fn prolong(coarse: &BlockVector, fine: &StaggeredLevel) -> Result<BlockVector> {
    check_pair(coarse.level(), fine)?;
    let mut out = BlockVector::zeros(fine);
    prolong_velocity_into(coarse, &mut out);
    prolong_pressure_into(coarse, &mut out);
    Ok(out)
}

/// Restricts both blocks (used for the residual).
pub fn restrict(fine: &BlockVector, coarse: &StaggeredLevel) -> Result<BlockVector> {
    check_pair(coarse, fine.level())?;
    let mut out = BlockVector::zeros(coarse);
    restrict_velocity_into(fine, &mut out);
    restrict_pressure_into(fine, &mut out);
    Ok(out)
}

/// Velocity prolongation as a matrix over the flat index spaces
/// (`fine.len() x coarse.len()`); pressure rows and columns are empty.
///
/// With `unknowns_only`, rows of fine boundary faces and columns of coarse
/// boundary faces are dropped.
pub fn velocity_prolongation_matrix(
    coarse: &StaggeredLevel,
    fine: &StaggeredLevel,
    unknowns_only: bool,
) -> Result<CsrMatrix> {
    check_pair(coarse, fine)?;
    let nf = fine.n();
    let mut b = TripletBuilder::with_capacity(fine.len(), coarse.len(), 2 * fine.n_velocity());
    let push = |b: &mut TripletBuilder, r: usize, c: usize, w: f64| {
        if !unknowns_only || (!fine.is_boundary(r) && !coarse.is_boundary(c)) {
            b.push(r, c, w);
        }
    };
    for jf in 0..nf {
        for i_f in 0..=nf {
            for (ic, w) in normal_stencil(i_f) {
                push(&mut b, fine.u1(i_f, jf), coarse.u1(ic, jf / 2), w);
            }
        }
    }
    for jf in 0..=nf {
        for i_f in 0..nf {
            for (jc, w) in normal_stencil(jf) {
                push(&mut b, fine.u2(i_f, jf), coarse.u2(i_f / 2, jc), w);
            }
        }
    }
    Ok(b.build())
}

/// Velocity restriction as a matrix (`coarse.len() x fine.len()`), assembled
/// by applying [`restrict_velocity`] to unit vectors.
pub fn velocity_restriction_matrix(
    coarse: &StaggeredLevel,
    fine: &StaggeredLevel,
) -> Result<CsrMatrix> {
    check_pair(coarse, fine)?;
    let mut b = TripletBuilder::new(coarse.len(), fine.len());
    let mut e = BlockVector::zeros(fine);
    let mut out = BlockVector::zeros(coarse);
    for col in 0..fine.n_velocity() {
        e.data_mut()[col] = 1.0;
        restrict_velocity_into(&e, &mut out);
        for (row, &v) in out.data().iter().enumerate() {
            b.push(row, col, v);
        }
        e.data_mut()[col] = 0.0;
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Dof;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(nc: usize) -> (StaggeredLevel, StaggeredLevel) {
        (StaggeredLevel::new(0, nc), StaggeredLevel::new(1, 2 * nc))
    }

    #[test]
    fn velocity_prolongation_reproduces_normal_linears() {
        let (c, f) = pair(8);
        let uc = BlockVector::from_fn(&c, |d, x, y| match d {
            Dof::U1 { .. } => 2.0 * x + 1.0,
            Dof::U2 { .. } => -y,
            Dof::P { .. } => 0.0,
        });
        let uf = prolong_velocity(&uc, &f).unwrap();
        for k in 0..f.n_velocity() {
            let (x, y) = f.position(k);
            let expected = match f.decode(k) {
                Dof::U1 { .. } => 2.0 * x + 1.0,
                _ => -y,
            };
            assert!((uf.data()[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn velocity_impulse_footprint() {
        let (c, f) = pair(8);
        let mut uc = BlockVector::zeros(&c);
        uc.data_mut()[c.u1(3, 4)] = 1.0;
        let uf = prolong_velocity(&uc, &f).unwrap();
        for k in 0..f.len() {
            if uf.data()[k] != 0.0 {
                match f.decode(k) {
                    Dof::U1 { i, j } => {
                        assert!((5..=7).contains(&i) && (8..=9).contains(&j));
                    }
                    other => panic!("unexpected footprint {other:?}"),
                }
            }
        }
    }

    #[test]
    fn restriction_is_the_adjoint() {
        let (c, f) = pair(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let mut uc = BlockVector::from_fn(&c, |_, _, _| rng.random_range(-1.0..1.0));
            let mut vf = BlockVector::from_fn(&f, |_, _, _| rng.random_range(-1.0..1.0));
            uc.pressure_mut().fill(0.0);
            vf.pressure_mut().fill(0.0);
            let lhs = prolong_velocity(&uc, &f).unwrap().inner_product(&vf).unwrap();
            let rhs = uc.inner_product(&restrict_velocity(&vf, &c).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-14 * lhs.abs().max(1.0));
        }
        let p = velocity_prolongation_matrix(&c, &f, false).unwrap();
        let r = velocity_restriction_matrix(&c, &f).unwrap();
        assert_eq!(r.add_scaled(1.0, &p.transpose(), -0.25).max_abs(), 0.0);
    }

    #[test]
    fn restricted_prolonged_constant() {
        let (c, f) = pair(8);
        let uc = BlockVector::from_fn(&c, |d, _, _| if matches!(d, Dof::P { .. }) { 0.0 } else { 3.0 });
        let back = restrict_velocity(&prolong_velocity(&uc, &f).unwrap(), &c).unwrap();
        for k in 0..c.n_velocity() {
            let expected = if c.is_boundary(k) { 2.25 } else { 3.0 };
            assert!((back.data()[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn pressure_transfers_on_linears() {
        let (c, f) = pair(8);
        let pc = BlockVector::from_fn(&c, |d, x, y| if matches!(d, Dof::P { .. }) { x - 2.0 * y } else { 0.0 });
        let pf = prolong_pressure(&pc, &f).unwrap();
        for j in 0..f.n() {
            for i in 0..f.n() {
                let (x, y) = f.cell_center(i, j);
                assert!((pf.p(i, j) - (x - 2.0 * y)).abs() < 1e-14);
            }
        }
        let back = restrict_pressure(&pf, &c).unwrap();
        for j in 0..c.n() {
            for i in 0..c.n() {
                let (x, y) = c.cell_center(i, j);
                assert!((back.p(i, j) - (x - 2.0 * y)).abs() < 1e-14);
            }
        }
        let ones = BlockVector::from_fn(&c, |d, _, _| if matches!(d, Dof::P { .. }) { 1.0 } else { 0.0 });
        let up = prolong(&ones, &f).unwrap();
        assert!(up.pressure().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(up.velocity().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_levels_are_rejected() {
        let c = StaggeredLevel::new(0, 8);
        let f = StaggeredLevel::new(1, 32);
        assert!(prolong(&BlockVector::zeros(&c), &f).is_err());
        assert!(restrict(&BlockVector::zeros(&f), &c).is_err());
    }
}
