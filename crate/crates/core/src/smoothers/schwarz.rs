//! Overlapping Schwarz smoothers on box subdomains.
//!
//! Each non-overlapping `box x box` tile is grown by `overlap` cells (clipped
//! at the walls). A subdomain's dofs `G_i` are the unknown faces on or inside
//! the grown box and the pressure cells inside it. Updates are written only on
//! the restricted set `G~_i` owned by the tile; a face on the seam between two
//! tiles belongs to the lower-indexed tile.

use std::collections::HashMap;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use crate::dense::DenseLu;
use crate::error::{IbmgError, Result};
use crate::grid::{Dof, StaggeredLevel};
use crate::system::LevelSystem;

#[derive(Debug)]
pub struct Subdomain {
    /// Cell range `[x0, x1) x [y0, y1)` of the grown box.
    pub cells: [usize; 4],
    /// Global indices of `G_i`, ascending.
    pub dofs: Vec<usize>,
    /// Positions within `dofs` of the restricted set `G~_i`.
    pub owned: Vec<usize>,
    factor: Arc<DenseLu>,
}

#[derive(Debug)]
pub struct SubdomainPartition {
    level: StaggeredLevel,
    box_size: usize,
    overlap: usize,
    subdomains: Vec<Subdomain>,
    distinct_factors: usize,
}

/// Sparse local matrix used to detect identical subdomain blocks.
type BlockKey = Vec<(u32, u32, u64)>;

impl SubdomainPartition {
    pub fn new(sys: &LevelSystem, box_size: usize, overlap: usize) -> Result<Self> {
        let level = *sys.level();
        let n = level.n();
        if box_size == 0 || !n.is_multiple_of(box_size) {
            return Err(IbmgError::InvalidPartition { box_size, n });
        }
        let nb = n / box_size;
        let l = sys.matrix();
        let mut local = vec![usize::MAX; level.len()];

        let mut keys: HashMap<BlockKey, usize> = HashMap::new();
        let mut distinct: Vec<(BlockKey, usize, bool, Vec<usize>)> = Vec::new();
        let mut pending = Vec::with_capacity(nb * nb);
        for by in 0..nb {
            for bx in 0..nb {
                let id = by * nb + bx;
                let x0 = (bx * box_size).saturating_sub(overlap);
                let x1 = ((bx + 1) * box_size + overlap).min(n);
                let y0 = (by * box_size).saturating_sub(overlap);
                let y1 = ((by + 1) * box_size + overlap).min(n);
                let dofs = box_dofs(&level, [x0, x1, y0, y1]);
                let owned: Vec<usize> = dofs
                    .iter()
                    .enumerate()
                    .filter(|&(_, &g)| owner(&level, box_size, g) == id)
                    .map(|(k, _)| k)
                    .collect();

                for (k, &g) in dofs.iter().enumerate() {
                    local[g] = k;
                }
                let mut key = BlockKey::new();
                for (k, &g) in dofs.iter().enumerate() {
                    let (cols, vals) = l.row(g);
                    for (&c, &v) in cols.iter().zip(vals) {
                        if local[c] != usize::MAX {
                            key.push((k as u32, local[c] as u32, v.to_bits()));
                        }
                    }
                }
                for &g in &dofs {
                    local[g] = usize::MAX;
                }
                let whole = x0 == 0 && y0 == 0 && x1 == n && y1 == n;
                let pressure: Vec<usize> = dofs
                    .iter()
                    .enumerate()
                    .filter(|&(_, &g)| g >= level.p_offset())
                    .map(|(k, _)| k)
                    .collect();
                let slot = match keys.get(&key) {
                    Some(&s) => s,
                    None => {
                        let s = distinct.len();
                        keys.insert(key.clone(), s);
                        distinct.push((key, dofs.len(), whole, pressure));
                        s
                    }
                };
                pending.push(([x0, x1, y0, y1], dofs, owned, slot));
            }
        }
        drop(keys);

        let factors: Vec<Arc<DenseLu>> = distinct
            .into_par_iter()
            .map(|(key, dim, whole, pressure)| {
                let mut m = Mat::<f64>::zeros(dim, dim);
                for &(i, j, bits) in &key {
                    m[(i as usize, j as usize)] = f64::from_bits(bits);
                }
                let lu = if whole {
                    DenseLu::factor_bordered(&m, &pressure)
                } else {
                    DenseLu::factor_with_pressure_shift(&m, &pressure)
                };
                lu.map(Arc::new)
            })
            .collect::<Result<_>>()?;
        let distinct_factors = factors.len();
        let subdomains = pending
            .into_iter()
            .map(|(cells, dofs, owned, slot)| Subdomain {
                cells,
                dofs,
                owned,
                factor: Arc::clone(&factors[slot]),
            })
            .collect();
        Ok(Self {
            level,
            box_size,
            overlap,
            subdomains,
            distinct_factors,
        })
    }

    pub fn level(&self) -> &StaggeredLevel {
        &self.level
    }

    pub fn box_size(&self) -> usize {
        self.box_size
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    /// Number of distinct dense factorizations (identical blocks share one).
    pub fn distinct_factors(&self) -> usize {
        self.distinct_factors
    }

    fn local_solve(&self, s: &Subdomain, r: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = s.dofs.iter().map(|&g| r[g]).collect();
        s.factor.solve_in_place(&mut x);
        x
    }

    /// One restricted additive sweep: `w <- w + sum_i R~_i^T L_i^{-1} R_i (b - L w)`.
    pub fn ras_apply(&self, sys: &LevelSystem, w: &mut [f64], b: &[f64]) {
        let mut r = b.to_vec();
        sys.residual_into(w, &mut r);
        let updates: Vec<Vec<f64>> = self
            .subdomains
            .par_iter()
            .map(|s| {
                let x = self.local_solve(s, &r);
                s.owned.iter().map(|&k| x[k]).collect()
            })
            .collect();
        for (s, upd) in self.subdomains.iter().zip(updates) {
            for (&k, v) in s.owned.iter().zip(upd) {
                w[s.dofs[k]] += v;
            }
        }
    }

    /// One restricted multiplicative sweep in lexicographic box order; the
    /// residual is updated from the columns touched by each correction.
    pub fn rms_apply(&self, sys: &LevelSystem, w: &mut [f64], b: &[f64]) {
        let lt = sys.matrix_transpose();
        let mut r = b.to_vec();
        sys.residual_into(w, &mut r);
        for s in &self.subdomains {
            let x = self.local_solve(s, &r);
            for &k in &s.owned {
                let g = s.dofs[k];
                let delta = x[k];
                if delta == 0.0 {
                    continue;
                }
                w[g] += delta;
                let (rows, vals) = lt.row(g);
                for (&i, v) in rows.iter().zip(vals) {
                    r[i] -= v * delta;
                }
            }
        }
    }

    /// Multiplicative sweep recomputing the full residual before every subdomain.
    pub fn rms_apply_full_residual(&self, sys: &LevelSystem, w: &mut [f64], b: &[f64]) {
        for s in &self.subdomains {
            let mut r = b.to_vec();
            sys.residual_into(w, &mut r);
            let x = self.local_solve(s, &r);
            for &k in &s.owned {
                w[s.dofs[k]] += x[k];
            }
        }
    }
}

/// Unknowns on or inside the cell box `[x0, x1) x [y0, y1)`, ascending.
fn box_dofs(level: &StaggeredLevel, [x0, x1, y0, y1]: [usize; 4]) -> Vec<usize> {
    let n = level.n();
    let mut dofs = Vec::new();
    for j in y0..y1 {
        for i in x0..=x1 {
            if i != 0 && i != n {
                dofs.push(level.u1(i, j));
            }
        }
    }
    for j in y0..=y1 {
        if j == 0 || j == n {
            continue;
        }
        for i in x0..x1 {
            dofs.push(level.u2(i, j));
        }
    }
    for j in y0..y1 {
        for i in x0..x1 {
            dofs.push(level.p(i, j));
        }
    }
    dofs
}

/// Tile owning a dof; seam faces go to the lower-indexed tile.
pub fn owner(level: &StaggeredLevel, box_size: usize, idx: usize) -> usize {
    let nb = level.n() / box_size;
    let seam = |k: usize| {
        if k.is_multiple_of(box_size) && k > 0 {
            k / box_size - 1
        } else {
            k / box_size
        }
    };
    let (bx, by) = match level.decode(idx) {
        Dof::U1 { i, j } => (seam(i), j / box_size),
        Dof::U2 { i, j } => (i / box_size, seam(j)),
        Dof::P { i, j } => (i / box_size, j / box_size),
    };
    by * nb + bx
}
