//! As-rigid-as-possible deformation with a local-global solver.
//!
//! The energy sums over directed edges, so every undirected edge appears
//! twice, once per endpoint rotation:
//!
//! ```text
//! E = Σ_i Σ_{j ∈ N(i)} w_ij ‖(p'_i − p'_j) − R_i (p_i − p_j)‖²
//! ```
//!
//! The global step solves `L p' = b` with `b_i = Σ_j w_ij/2 (R_i + R_j)(p_i − p_j)`.
//! Hard handles are eliminated from the system; soft handles add their weight
//! to the diagonal and `weight × target` to the right-hand side, which makes
//! the minimised objective `E + 2 λ Σ ‖p'_c − t_c‖²` under this convention.
//! The factorisation is cached and reused for as long as the constraint id
//! set and soft weight stay the same.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{EdgeWeights, Mesh};
use crate::sparse::{SpdFactor, SymmetricBuilder};
use crate::{Mat3, Vec3};

/// Soft stiffness relative to the largest Laplacian diagonal entry.
pub const DEFAULT_SOFT_SCALE: f64 = 10.0;
pub const DEFAULT_ITERATIONS: usize = 20;

/// Best rotation taking `rest_edges` onto `deformed_edges` in the weighted
/// least-squares sense. Never returns a reflection.
pub fn fit_rotation(rest_edges: &[Vec3], deformed_edges: &[Vec3], weights: &[f64]) -> Mat3 {
    debug_assert_eq!(rest_edges.len(), deformed_edges.len());
    debug_assert_eq!(rest_edges.len(), weights.len());
    let mut s = Mat3::zeros();
    for ((e, d), &w) in rest_edges.iter().zip(deformed_edges).zip(weights) {
        s += w * e * d.transpose();
    }
    rotation_from_covariance(&s)
}

/// Rotation maximising `tr(R S)` for the covariance `S = Σ w e dᵀ`.
pub fn rotation_from_covariance(s: &Mat3) -> Mat3 {
    let svd = s.svd(true, true);
    let mut u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v requested").transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // Singular values are sorted descending; flip the smallest direction.
        let mut col = u.column_mut(2);
        col.neg_mut();
        r = v * u.transpose();
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    Hard,
    Soft,
}

/// Handle set for a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub handles: BTreeMap<usize, Vec3>,
    pub mode: ConstraintMode,
    /// Soft stiffness; `None` picks `10 × max diag(L)`. Ignored in hard mode.
    pub soft_weight: Option<f64>,
    /// Extra hard pins applied alongside soft handles.
    pub pins: BTreeMap<usize, Vec3>,
}

impl Constraints {
    pub fn hard(handles: BTreeMap<usize, Vec3>) -> Self {
        Self { handles, mode: ConstraintMode::Hard, soft_weight: None, pins: BTreeMap::new() }
    }

    pub fn soft(handles: BTreeMap<usize, Vec3>, weight: Option<f64>) -> Self {
        Self { handles, mode: ConstraintMode::Soft, soft_weight: weight, pins: BTreeMap::new() }
    }

    fn hard_set(&self) -> BTreeMap<usize, Vec3> {
        match self.mode {
            ConstraintMode::Hard => {
                let mut all = self.pins.clone();
                all.extend(self.handles.iter().map(|(&k, &v)| (k, v)));
                all
            }
            ConstraintMode::Soft => self.pins.clone(),
        }
    }

    fn soft_set(&self) -> BTreeMap<usize, Vec3> {
        match self.mode {
            ConstraintMode::Hard => BTreeMap::new(),
            ConstraintMode::Soft => {
                self.handles.iter().filter(|(k, _)| !self.pins.contains_key(k)).map(|(&k, &v)| (k, v)).collect()
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.handles.is_empty() && self.pins.is_empty() {
            return Err(Error::NoHandles);
        }
        for (&i, p) in self.handles.iter().chain(&self.pins) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        if let Some(w) = self.soft_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParams(format!("soft weight must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Directed-edge ARAP energy for given positions and per-vertex rotations.
pub fn arap_energy(mesh: &Mesh, positions: &[Vec3], rotations: &[Mat3], weights: &EdgeWeights) -> Result<f64> {
    let n = mesh.vertex_count();
    for len in [positions.len(), rotations.len()] {
        if len != n {
            return Err(Error::SizeMismatch { expected: n, found: len });
        }
    }
    if weights.len() != mesh.edge_count() {
        return Err(Error::SizeMismatch { expected: mesh.edge_count(), found: weights.len() });
    }
    let rest = mesh.positions();
    let mut total = 0.0;
    for (e, &[i, j]) in mesh.edges().iter().enumerate() {
        let w = weights.0[e];
        let d = positions[i] - positions[j];
        let r = rest[i] - rest[j];
        total += w * (d - rotations[i] * r).norm_squared();
        total += w * (-d + rotations[j] * r).norm_squared();
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct ArapSolution {
    pub positions: Vec<Vec3>,
    /// Objective after each iteration; entry 0 is the initial configuration.
    pub energy_trace: Vec<f64>,
    /// Rotations fitted to the final positions.
    pub rotations: Vec<Mat3>,
}

impl ArapSolution {
    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().expect("trace has the initial entry")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct FactorKey {
    hard: Vec<usize>,
    soft: Vec<usize>,
    soft_weight: u64,
}

#[derive(Debug)]
struct CachedFactor {
    key: FactorKey,
    factor: SpdFactor,
    /// Vertex to row of the reduced system; `usize::MAX` for hard handles.
    row: Vec<usize>,
    free: Vec<usize>,
}

/// Prefactorised ARAP solver for one rest mesh.
#[derive(Debug)]
pub struct ArapSystem {
    mesh: Mesh,
    raw_weights: EdgeWeights,
    weights: EdgeWeights,
    clamped: bool,
    /// CSR one-rings: neighbour, weight, rest edge `p_i − p_j`.
    offsets: Vec<usize>,
    nbr: Vec<usize>,
    nbr_w: Vec<f64>,
    nbr_rest: Vec<Vec3>,
    diag: Vec<f64>,
    cache: Option<CachedFactor>,
}

struct Resolved {
    hard: BTreeMap<usize, Vec3>,
    soft: BTreeMap<usize, Vec3>,
    soft_weight: f64,
}

impl ArapSystem {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let weights = mesh.cotangent_weights()?;
        Ok(Self::with_weights(mesh, weights))
    }

    pub fn with_weights(mesh: &Mesh, weights: EdgeWeights) -> Self {
        let mut sys = Self {
            mesh: mesh.clone(),
            raw_weights: weights.clone(),
            weights,
            clamped: false,
            offsets: Vec::new(),
            nbr: Vec::new(),
            nbr_w: Vec::new(),
            nbr_rest: Vec::new(),
            diag: Vec::new(),
            cache: None,
        };
        sys.rebuild_adjacency();
        sys
    }

    fn rebuild_adjacency(&mut self) {
        let m = &self.mesh;
        let n = m.vertex_count();
        let rest = m.positions();
        self.offsets = Vec::with_capacity(n + 1);
        self.offsets.push(0);
        self.nbr.clear();
        self.nbr_w.clear();
        self.nbr_rest.clear();
        self.diag = vec![0.0; n];
        for i in 0..n {
            for &e in m.vertex_edges(i) {
                let [a, b] = m.edges()[e];
                let j = if a == i { b } else { a };
                let w = self.weights.0[e];
                self.nbr.push(j);
                self.nbr_w.push(w);
                self.nbr_rest.push(rest[i] - rest[j]);
                self.diag[i] += w;
            }
            self.offsets.push(self.nbr.len());
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Weights in use; negative entries are zeroed after a failed factorisation.
    pub fn weights(&self) -> &EdgeWeights {
        &self.weights
    }

    pub fn weights_clamped(&self) -> bool {
        self.clamped
    }

    pub fn max_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(0.0, f64::max)
    }

    pub fn default_soft_weight(&self) -> f64 {
        DEFAULT_SOFT_SCALE * self.max_diagonal()
    }

    fn resolve(&self, c: &Constraints) -> Result<Resolved> {
        c.validate(self.mesh.vertex_count())?;
        Ok(Resolved {
            hard: c.hard_set(),
            soft: c.soft_set(),
            soft_weight: c.soft_weight.unwrap_or_else(|| self.default_soft_weight()),
        })
    }

    fn ensure_factor(&mut self, r: &Resolved) -> Result<()> {
        let key = FactorKey {
            hard: r.hard.keys().copied().collect(),
            soft: r.soft.keys().copied().collect(),
            soft_weight: if r.soft.is_empty() { 0 } else { r.soft_weight.to_bits() },
        };
        if self.cache.as_ref().is_some_and(|c| c.key == key) {
            return Ok(());
        }
        match self.factorize(&key, r) {
            Ok(c) => {
                self.cache = Some(c);
                Ok(())
            }
            Err(_) if !self.clamped && self.raw_weights.has_negative() => {
                self.weights = self.raw_weights.clamped_non_negative();
                self.clamped = true;
                self.rebuild_adjacency();
                let c = self.factorize(&key, r).map_err(|_| Error::SingularSystem)?;
                self.cache = Some(c);
                Ok(())
            }
            Err(_) => Err(Error::SingularSystem),
        }
    }

    fn factorize(&self, key: &FactorKey, r: &Resolved) -> std::result::Result<CachedFactor, ()> {
        let n = self.mesh.vertex_count();
        let mut row = vec![usize::MAX; n];
        let mut free = Vec::with_capacity(n - r.hard.len());
        for i in 0..n {
            if !r.hard.contains_key(&i) {
                row[i] = free.len();
                free.push(i);
            }
        }
        let mut b = SymmetricBuilder::with_capacity(free.len(), free.len() + self.nbr.len() / 2);
        for (fi, &i) in free.iter().enumerate() {
            let mut d = self.diag[i];
            if r.soft.contains_key(&i) {
                d += r.soft_weight;
            }
            b.add(fi, fi, d);
            for k in self.offsets[i]..self.offsets[i + 1] {
                let j = self.nbr[k];
                if row[j] != usize::MAX && j < i {
                    b.add(fi, row[j], -self.nbr_w[k]);
                }
            }
        }
        let factor = SpdFactor::factorize(&b).map_err(|_| ())?;
        Ok(CachedFactor { key: key.clone(), factor, row, free })
    }

    /// Local step: best rotation per vertex and the energy of each one-ring.
    pub fn local_step(&self, positions: &[Vec3]) -> (Vec<Mat3>, Vec<f64>) {
        let n = self.mesh.vertex_count();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let range = self.offsets[i]..self.offsets[i + 1];
                let mut s = Mat3::zeros();
                for k in range.clone() {
                    let d = positions[i] - positions[self.nbr[k]];
                    s += self.nbr_w[k] * self.nbr_rest[k] * d.transpose();
                }
                let r = rotation_from_covariance(&s);
                let mut e = 0.0;
                for k in range {
                    let d = positions[i] - positions[self.nbr[k]];
                    e += self.nbr_w[k] * (d - r * self.nbr_rest[k]).norm_squared();
                }
                (r, e)
            })
            .unzip()
    }

    /// Global step: positions minimising the energy for fixed rotations.
    pub fn global_step(&mut self, rotations: &[Mat3], constraints: &Constraints) -> Result<Vec<Vec3>> {
        let r = self.resolve(constraints)?;
        self.global_step_resolved(rotations, &r)
    }

    fn global_step_resolved(&mut self, rotations: &[Mat3], r: &Resolved) -> Result<Vec<Vec3>> {
        let n = self.mesh.vertex_count();
        if rotations.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: rotations.len() });
        }
        self.ensure_factor(r)?;
        let cache = self.cache.as_ref().expect("factor ensured");
        let rhs_of = |i: usize| {
            let mut b = Vec3::zeros();
            for k in self.offsets[i]..self.offsets[i + 1] {
                let j = self.nbr[k];
                let w = self.nbr_w[k];
                b += (0.5 * w) * ((rotations[i] + rotations[j]) * self.nbr_rest[k]);
                if let Some(x) = r.hard.get(&j) {
                    b += w * x;
                }
            }
            if let Some(t) = r.soft.get(&i) {
                b += r.soft_weight * t;
            }
            b
        };
        let mut rhs: Vec<Vec3> = cache.free.par_iter().map(|&i| rhs_of(i)).collect();
        cache.factor.solve_in_place(&mut rhs);
        let mut out = vec![Vec3::zeros(); n];
        for (i, p) in out.iter_mut().enumerate() {
            *p = match r.hard.get(&i) {
                Some(x) => *x,
                None => rhs[cache.row[i]],
            };
        }
        Ok(out)
    }

    fn soft_penalty(&self, positions: &[Vec3], r: &Resolved) -> f64 {
        2.0 * r.soft_weight * r.soft.iter().map(|(&i, t)| (positions[i] - t).norm_squared()).sum::<f64>()
    }

    /// Default start: the rest shape moved by the rigid motion best fitting
    /// the handles, with hard handles snapped onto their targets.
    fn default_init(&self, r: &Resolved) -> Vec<Vec3> {
        let rest = self.mesh.positions();
        let pairs: Vec<(Vec3, Vec3)> = r.hard.iter().chain(&r.soft).map(|(&i, &t)| (rest[i], t)).collect();
        let k = pairs.len() as f64;
        let c_rest = pairs.iter().map(|p| p.0).sum::<Vec3>() / k;
        let c_tgt = pairs.iter().map(|p| p.1).sum::<Vec3>() / k;
        let src: Vec<Vec3> = pairs.iter().map(|p| p.0 - c_rest).collect();
        let dst: Vec<Vec3> = pairs.iter().map(|p| p.1 - c_tgt).collect();
        let rot = fit_rotation(&src, &dst, &vec![1.0; pairs.len()]);
        let mut p: Vec<Vec3> = rest.iter().map(|x| rot * (x - c_rest) + c_tgt).collect();
        for (&i, &t) in &r.hard {
            p[i] = t;
        }
        p
    }

    /// Runs `iterations` local-global rounds.
    pub fn solve(&mut self, constraints: &Constraints, iterations: usize, init: Option<&[Vec3]>) -> Result<ArapSolution> {
        let n = self.mesh.vertex_count();
        let r = self.resolve(constraints)?;
        let mut positions = match init {
            Some(p) => {
                if p.len() != n {
                    return Err(Error::SizeMismatch { expected: n, found: p.len() });
                }
                let mut p = p.to_vec();
                for (&i, &t) in &r.hard {
                    p[i] = t;
                }
                p
            }
            None => self.default_init(&r),
        };
        if r.hard.len() == n {
            let (rotations, e) = self.local_step(&positions);
            return Ok(ArapSolution { positions, energy_trace: vec![e.iter().sum()], rotations });
        }
        // Factorise (and possibly clamp weights) before the first energy so the
        // whole trace uses one set of weights.
        self.ensure_factor(&r)?;
        let (mut rotations, e) = self.local_step(&positions);
        let mut trace = Vec::with_capacity(iterations + 1);
        trace.push(e.iter().sum::<f64>() + self.soft_penalty(&positions, &r));
        for _ in 0..iterations {
            positions = self.global_step_resolved(&rotations, &r)?;
            let (rots, e) = self.local_step(&positions);
            rotations = rots;
            trace.push(e.iter().sum::<f64>() + self.soft_penalty(&positions, &r));
        }
        Ok(ArapSolution { positions, energy_trace: trace, rotations })
    }
}

/// One-shot solve on `mesh` with cotangent weights.
pub fn arap_solve(mesh: &Mesh, constraints: &Constraints, iterations: usize, init: Option<&[Vec3]>) -> Result<ArapSolution> {
    ArapSystem::new(mesh)?.solve(constraints, iterations, init)
}
