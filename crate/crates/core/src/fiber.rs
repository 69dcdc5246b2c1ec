//! Lagrangian fiber meshes and the linear fiber stiffness operator.
//!
//! A mesh is a family of `m2` fibers, each with `m1` nodes along the leading
//! curvilinear coordinate `s1`. Nodes are stored fiber-major: node `(l, m)` is
//! at index `m * m1 + l`. Fibers have zero rest length, so the tension force
//! `F = d/ds1 (T tau)` with `T = alpha |dX/ds1|` reduces to `alpha d^2X/ds1^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{IbmgError, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Node coordinates or node forces.
pub type NodeArray = Vec<[f64; 2]>;

/// Explicit-stability stiffness scale `3.93 / 0.005` used to normalize `alpha`.
pub const STIFFNESS_SCALE: f64 = 3.93 / 0.005;

/// Center of the annulus and the thin membrane.
pub const CENTER: [f64; 2] = [0.5, 0.5];
/// Inner radius of the annulus and radius of the thin membrane.
pub const RADIUS: f64 = 0.25;
/// Thickness of the annulus.
pub const THICKNESS: f64 = 1.0 / 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Geometry {
    Thick,
    Thin,
    Suspension,
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Thick => "thick",
            Geometry::Thin => "thin",
            Geometry::Suspension => "suspension",
        }
    }
}

impl std::str::FromStr for Geometry {
    type Err = IbmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thick" => Ok(Geometry::Thick),
            "thin" => Ok(Geometry::Thin),
            "suspension" => Ok(Geometry::Suspension),
            other => Err(IbmgError::InvalidConfig(format!("unknown problem '{other}'"))),
        }
    }
}

/// Relative stiffness `gamma` and the geometry it is normalized for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StiffnessSpec {
    pub gamma: f64,
    pub geometry: Geometry,
}

impl StiffnessSpec {
    pub fn new(gamma: f64, geometry: Geometry) -> Self {
        Self { gamma, geometry }
    }

    /// Fiber stiffness: thin structures carry a factor 7 to give a similar total force.
    pub fn alpha(&self) -> f64 {
        match self.geometry {
            Geometry::Thick => self.gamma * STIFFNESS_SCALE,
            Geometry::Thin | Geometry::Suspension => 7.0 * self.gamma * STIFFNESS_SCALE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberMesh {
    positions: NodeArray,
    m1: usize,
    m2: usize,
    ds1: f64,
    ds2: f64,
    periodic_s1: bool,
    alpha: f64,
}

impl FiberMesh {
    pub fn new(
        positions: NodeArray,
        m1: usize,
        m2: usize,
        ds1: f64,
        ds2: f64,
        periodic_s1: bool,
        alpha: f64,
    ) -> Result<Self> {
        if m1 < 3 || m2 == 0 || positions.len() != m1 * m2 {
            return Err(IbmgError::InvalidMesh(format!(
                "{} positions for a {m1} x {m2} mesh",
                positions.len()
            )));
        }
        if !(ds1 > 0.0 && ds2 > 0.0 && alpha >= 0.0) {
            return Err(IbmgError::InvalidMesh(format!(
                "need ds1, ds2 > 0 and alpha >= 0 (ds1={ds1}, ds2={ds2}, alpha={alpha})"
            )));
        }
        if let Some(p) = positions
            .iter()
            .find(|p| !(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0))
        {
            return Err(IbmgError::InvalidMesh(format!(
                "node ({}, {}) is outside the unit square",
                p[0], p[1]
            )));
        }
        Ok(Self {
            positions,
            m1,
            m2,
            ds1,
            ds2,
            periodic_s1,
            alpha,
        })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn ds1(&self) -> f64 {
        self.ds1
    }

    pub fn ds2(&self) -> f64 {
        self.ds2
    }

    pub fn periodic_s1(&self) -> bool {
        self.periodic_s1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// Quadrature weight `ds1 * ds2` attached to every node.
    pub fn weight(&self) -> f64 {
        self.ds1 * self.ds2
    }

    #[inline]
    pub fn index(&self, l: usize, m: usize) -> usize {
        m * self.m1 + l
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn check_shape(&self, x: &[[f64; 2]]) -> Result<()> {
        if x.len() != self.node_count() {
            return Err(IbmgError::ShapeMismatch {
                expected: self.node_count(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Neighbors `(l - 1, l + 1)` along a fiber, `None` past a free end.
    fn neighbors(&self, l: usize) -> (Option<usize>, Option<usize>) {
        let m1 = self.m1;
        if self.periodic_s1 {
            (Some((l + m1 - 1) % m1), Some((l + 1) % m1))
        } else {
            ((l > 0).then(|| l - 1), (l + 1 < m1).then_some(l + 1))
        }
    }

    /// `F = alpha D^2 X / ds1^2` per fiber; fibers do not couple.
    pub fn apply_k(&self, x: &[[f64; 2]]) -> Result<NodeArray> {
        self.check_shape(x)?;
        let c = self.alpha / (self.ds1 * self.ds1);
        let mut f = vec![[0.0; 2]; x.len()];
        for m in 0..self.m2 {
            for l in 0..self.m1 {
                let k = self.index(l, m);
                let (lo, hi) = self.neighbors(l);
                for d in 0..2 {
                    let mut s = 0.0;
                    if let Some(h) = hi {
                        s += x[self.index(h, m)][d] - x[k][d];
                    }
                    if let Some(lw) = lo {
                        s += x[self.index(lw, m)][d] - x[k][d];
                    }
                    f[k][d] = c * s;
                }
            }
        }
        Ok(f)
    }

    /// General tension form: half-index tension `T` and tangent `tau`, then
    /// `F_l = ((T tau)_{l+1/2} - (T tau)_{l-1/2}) / ds1`.
    pub fn tension_force(&self, x: &[[f64; 2]]) -> Result<NodeArray> {
        self.check_shape(x)?;
        let m1 = self.m1;
        let segments = if self.periodic_s1 { m1 } else { m1 - 1 };
        let mut f = vec![[0.0; 2]; x.len()];
        for m in 0..self.m2 {
            // (T tau) at l + 1/2 for each segment.
            let ttau: Vec<[f64; 2]> = (0..segments)
                .map(|l| {
                    let a = x[self.index(l, m)];
                    let b = x[self.index((l + 1) % m1, m)];
                    let dx = [(b[0] - a[0]) / self.ds1, (b[1] - a[1]) / self.ds1];
                    let len = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
                    if len == 0.0 {
                        return [0.0, 0.0];
                    }
                    let tension = self.alpha * len;
                    [tension * dx[0] / len, tension * dx[1] / len]
                })
                .collect();
            for l in 0..m1 {
                let plus = if self.periodic_s1 || l < segments {
                    ttau[l]
                } else {
                    [0.0; 2]
                };
                let minus = if self.periodic_s1 {
                    ttau[(l + m1 - 1) % m1]
                } else if l > 0 {
                    ttau[l - 1]
                } else {
                    [0.0; 2]
                };
                let k = self.index(l, m);
                f[k] = [
                    (plus[0] - minus[0]) / self.ds1,
                    (plus[1] - minus[1]) / self.ds1,
                ];
            }
        }
        Ok(f)
    }

    /// Scalar stiffness matrix over this mesh's nodes (applies to each coordinate).
    pub fn assemble_k_scalar(&self) -> CsrMatrix {
        let n = self.node_count();
        let c = self.alpha / (self.ds1 * self.ds1);
        let mut b = TripletBuilder::with_capacity(n, n, 3 * n);
        for m in 0..self.m2 {
            for l in 0..self.m1 {
                let k = self.index(l, m);
                let (lo, hi) = self.neighbors(l);
                for nb in [lo, hi].into_iter().flatten() {
                    b.push(k, self.index(nb, m), c);
                    b.push(k, k, -c);
                }
            }
        }
        b.build()
    }

    /// Stiffness matrix over `2 * nodes` coordinates, x-components first.
    pub fn assemble_k(&self) -> CsrMatrix {
        let ks = self.assemble_k_scalar();
        let n = self.node_count();
        let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, 2 * ks.nnz());
        for (i, j, v) in ks.triplets() {
            b.push(i, j, v);
            b.push(n + i, n + j, v);
        }
        b.build()
    }
}

/// Thick annulus on an `n x n` grid: `19n/8` nodes around, `3n/32 + 1` fibers across.
pub fn make_thick_annulus(n: usize, alpha: f64) -> Result<FiberMesh> {
    if n == 0 || !n.is_multiple_of(32) {
        return Err(IbmgError::InvalidMesh(format!(
            "thick annulus needs N divisible by 32, got {n}"
        )));
    }
    make_thick_annulus_with(19 * n / 8, 3 * n / 32 + 1, alpha)
}

/// Thick annulus with explicit node counts (`m2 >= 2`).
pub fn make_thick_annulus_with(m1: usize, m2: usize, alpha: f64) -> Result<FiberMesh> {
    if m2 < 2 {
        return Err(IbmgError::InvalidMesh("annulus needs at least two fibers".into()));
    }
    let ds1 = 2.0 * PI / m1 as f64;
    let ds2 = THICKNESS / (m2 - 1) as f64;
    let mut positions = Vec::with_capacity(m1 * m2);
    for m in 0..m2 {
        let radius = RADIUS + m as f64 * ds2;
        for l in 0..m1 {
            let s1 = l as f64 * ds1;
            positions.push([
                CENTER[0] + radius * s1.cos(),
                CENTER[1] + radius * s1.sin(),
            ]);
        }
    }
    FiberMesh::new(positions, m1, m2, ds1, ds2, true, alpha)
}

/// Closed circular fiber with `m1` nodes; `ds2 = 1` for a codimension-one membrane.
pub fn make_circle(center: [f64; 2], radius: f64, m1: usize, alpha: f64) -> Result<FiberMesh> {
    let ds1 = 2.0 * PI / m1 as f64;
    let positions = (0..m1)
        .map(|l| {
            let s1 = l as f64 * ds1;
            [center[0] + radius * s1.cos(), center[1] + radius * s1.sin()]
        })
        .collect();
    FiberMesh::new(positions, m1, 1, ds1, 1.0, true, alpha)
}

/// Thin membrane of radius 1/4 with `19n/8` nodes.
pub fn make_thin_membrane(n: usize, alpha: f64) -> Result<FiberMesh> {
    if n == 0 || !n.is_multiple_of(8) {
        return Err(IbmgError::InvalidMesh(format!(
            "thin membrane needs N divisible by 8, got {n}"
        )));
    }
    make_circle(CENTER, RADIUS, 19 * n / 8, alpha)
}

/// Placement rules for the suspension of circles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuspensionLayout {
    pub count: usize,
    pub radius: f64,
    /// Required clearance between neighboring circles.
    pub gap_margin: f64,
    /// Required clearance between a circle and the walls.
    pub wall_margin: f64,
}

impl SuspensionLayout {
    /// Sixteen circles of radius 1/16 with `4h` clearances.
    pub fn standard(n: usize) -> Self {
        let h = 1.0 / n as f64;
        Self {
            count: 16,
            radius: 1.0 / 16.0,
            gap_margin: 4.0 * h,
            wall_margin: 4.0 * h,
        }
    }
}

const PLACEMENT_TRIES_PER_CIRCLE: usize = 20_000;
const PLACEMENT_RESTARTS: usize = 200;

/// Randomly placed circles; node spacing along each circle is about `2h/3`.
pub fn make_suspension(n: usize, seed: u64, alpha: f64) -> Result<Vec<FiberMesh>> {
    make_suspension_with(n, seed, alpha, SuspensionLayout::standard(n))
}

pub fn make_suspension_with(
    n: usize,
    seed: u64,
    alpha: f64,
    layout: SuspensionLayout,
) -> Result<Vec<FiberMesh>> {
    if n == 0 || !n.is_multiple_of(8) {
        return Err(IbmgError::InvalidMesh(format!(
            "suspension needs N divisible by 8, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let r = layout.radius;
    let lo = r + layout.wall_margin;
    let hi = 1.0 - lo;
    if lo >= hi {
        return Err(IbmgError::PlacementFailed { seed, attempts: 0 });
    }
    let min_dist = 2.0 * r + layout.gap_margin;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    let mut centers: Vec<[f64; 2]> = Vec::with_capacity(layout.count);
    'restart: for _ in 0..PLACEMENT_RESTARTS {
        centers.clear();
        while centers.len() < layout.count {
            let mut placed = false;
            for _ in 0..PLACEMENT_TRIES_PER_CIRCLE {
                attempts += 1;
                let c = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
                let clear = centers.iter().all(|o| {
                    let d = ((c[0] - o[0]).powi(2) + (c[1] - o[1]).powi(2)).sqrt();
                    d > min_dist
                });
                if clear {
                    centers.push(c);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        break;
    }
    if centers.len() < layout.count {
        return Err(IbmgError::PlacementFailed { seed, attempts });
    }
    let m1 = (3.0 * PI * r / h).ceil() as usize;
    centers
        .iter()
        .map(|&c| make_circle(c, r, m1, alpha))
        .collect()
}

/// All immersed meshes of one problem, with a global node numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    meshes: Vec<FiberMesh>,
    offsets: Vec<usize>,
}

impl Structure {
    pub fn new(meshes: Vec<FiberMesh>) -> Self {
        let mut offsets = Vec::with_capacity(meshes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for m in &meshes {
            acc += m.node_count();
            offsets.push(acc);
        }
        Self { meshes, offsets }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn meshes(&self) -> &[FiberMesh] {
        &self.meshes
    }

    pub fn node_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// First global node index of each mesh.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets[..self.meshes.len()]
    }

    pub fn positions(&self) -> NodeArray {
        self.meshes
            .iter()
            .flat_map(|m| m.positions().iter().copied())
            .collect()
    }

    /// Quadrature weight of every node.
    pub fn weights(&self) -> Vec<f64> {
        self.meshes
            .iter()
            .flat_map(|m| std::iter::repeat_n(m.weight(), m.node_count()))
            .collect()
    }

    /// Copy of the structure with node positions replaced.
    pub fn with_positions(&self, x: &[[f64; 2]]) -> Result<Self> {
        if x.len() != self.node_count() {
            return Err(IbmgError::ShapeMismatch {
                expected: self.node_count(),
                found: x.len(),
            });
        }
        let meshes = self
            .meshes
            .iter()
            .zip(&self.offsets)
            .map(|(m, &o)| {
                let mut m = m.clone();
                m.positions = x[o..o + m.node_count()].to_vec();
                m
            })
            .collect();
        Ok(Self::new(meshes))
    }

    pub fn apply_k(&self, x: &[[f64; 2]]) -> Result<NodeArray> {
        if x.len() != self.node_count() {
            return Err(IbmgError::ShapeMismatch {
                expected: self.node_count(),
                found: x.len(),
            });
        }
        let mut f = Vec::with_capacity(x.len());
        for (m, &o) in self.meshes.iter().zip(&self.offsets) {
            f.extend(m.apply_k(&x[o..o + m.node_count()])?);
        }
        Ok(f)
    }

    /// Stiffness over `2 * nodes` coordinates (x-components first).
    pub fn assemble_k(&self) -> CsrMatrix {
        let n = self.node_count();
        let mut b = TripletBuilder::new(2 * n, 2 * n);
        for (m, &o) in self.meshes.iter().zip(&self.offsets) {
            for (i, j, v) in m.assemble_k_scalar().triplets() {
                b.push(o + i, o + j, v);
                b.push(n + o + i, n + o + j, v);
            }
        }
        b.build()
    }
}

/// Flattens node pairs into `[x_0.., y_0..]`.
pub fn flatten(x: &[[f64; 2]]) -> Vec<f64> {
    x.iter().map(|p| p[0]).chain(x.iter().map(|p| p[1])).collect()
}

pub fn unflatten(v: &[f64]) -> NodeArray {
    let n = v.len() / 2;
    (0..n).map(|k| [v[k], v[n + k]]).collect()
}
