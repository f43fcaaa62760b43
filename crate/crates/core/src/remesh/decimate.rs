use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use smallvec::SmallVec;

use super::link::{collapse_is_legal, Neighborhood};
use super::CoarseMesh;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::{Mat3, Vec3};

pub const DEFAULT_TARGET_RATIO: f64 = 0.05;

/// Smallest vertex count decimation will aim for.
const MIN_VERTICES: usize = 4;
/// Boundary constraint planes are weighted by this times the squared edge length.
const BOUNDARY_PENALTY: f64 = 100.0;
/// Weight of the squared edge length added to every collapse cost, relative to
/// the squared mean input edge length. Orders collapses that are free under
/// the quadrics (flat regions) shortest first, keeping the triangulation even.
const LENGTH_REGULARIZER: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct DecimateOptions {
    pub target_ratio: f64,
    /// Accepted for interface stability; the collapse order is fully determined
    /// by costs and vertex ids.
    pub seed: u64,
    /// Rebuild and validate the mesh after every collapse. Quadratic; for tests.
    pub validate_steps: bool,
}

impl Default for DecimateOptions {
    fn default() -> Self {
        Self { target_ratio: DEFAULT_TARGET_RATIO, seed: 0, validate_steps: false }
    }
}

pub fn decimate(m: &Mesh, target_ratio: f64, seed: u64) -> Result<CoarseMesh> {
    decimate_with(m, &DecimateOptions { target_ratio, seed, ..Default::default() })
}

#[derive(Debug, Clone, Copy, Default)]
struct Quadric {
    a: Mat3,
    b: Vec3,
    c: f64,
}

impl Quadric {
    fn plane(n: Vec3, d: f64, w: f64) -> Self {
        Self { a: n * n.transpose() * w, b: n * (d * w), c: d * d * w }
    }

    fn eval(&self, x: &Vec3) -> f64 {
        (x.dot(&(self.a * x)) + 2.0 * self.b.dot(x) + self.c).max(0.0)
    }
}

impl std::ops::Add for Quadric {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c }
    }
}

impl std::ops::AddAssign for Quadric {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    stamp: (u32, u32),
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.cost.total_cmp(&o.cost).then(self.u.cmp(&o.u)).then(self.v.cmp(&o.v))
    }
}

struct Work {
    pos: Vec<Vec3>,
    tris: Vec<[usize; 3]>,
    tri_alive: Vec<bool>,
    vtris: Vec<SmallVec<[usize; 8]>>,
    boundary: Vec<bool>,
    alive: Vec<bool>,
    version: Vec<u32>,
    quadric: Vec<Quadric>,
    area_eps: f64,
    length_weight: f64,
    alive_count: usize,
}

impl Neighborhood for Work {
    fn incident(&self, v: usize) -> &[usize] {
        &self.vtris[v]
    }

    fn triangle(&self, t: usize) -> [usize; 3] {
        self.tris[t]
    }

    fn on_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }
}

impl Work {
    fn new(m: &Mesh) -> Self {
        let n = m.vertex_count();
        let pos = m.positions().to_vec();
        let tris = m.triangles().to_vec();
        let vtris = (0..n).map(|v| m.vertex_fan(v).iter().copied().collect()).collect();
        let boundary = (0..n).map(|v| m.is_boundary_vertex(v)).collect();

        let mut quadric = vec![Quadric::default(); n];
        for (t, tri) in tris.iter().enumerate() {
            let cross = m.triangle_cross(t);
            let len = cross.norm();
            if len == 0.0 {
                continue;
            }
            let nrm = cross / len;
            let q = Quadric::plane(nrm, -nrm.dot(&pos[tri[0]]), 0.5 * len);
            for &v in tri {
                quadric[v] += q;
            }
        }
        for (e, &[a, b]) in m.edges().iter().enumerate() {
            if !m.is_boundary_edge(e) {
                continue;
            }
            let t = m.edge_triangles(e)[0];
            let dir = pos[b] - pos[a];
            let side = dir.cross(&m.triangle_cross(t));
            let len = side.norm();
            if len == 0.0 {
                continue;
            }
            let nrm = side / len;
            let q = Quadric::plane(nrm, -nrm.dot(&pos[a]), BOUNDARY_PENALTY * dir.norm_squared());
            quadric[a] += q;
            quadric[b] += q;
        }

        Self {
            pos,
            tri_alive: vec![true; tris.len()],
            tris,
            vtris,
            boundary,
            alive: vec![true; n],
            version: vec![0; n],
            quadric,
            area_eps: m.area_epsilon(),
            length_weight: LENGTH_REGULARIZER * m.mean_edge_length().powi(2),
            alive_count: n,
        }
    }

    /// Placement and cost of merging `u` and `v`.
    fn placement(&self, u: usize, v: usize) -> (Vec3, f64) {
        let q = self.quadric[u] + self.quadric[v];
        let mid = 0.5 * (self.pos[u] + self.pos[v]);
        let edge_len = (self.pos[u] - self.pos[v]).norm();
        let scale = q.a.norm();
        let target = match q.a.try_inverse() {
            Some(inv) if q.a.determinant().abs() > 1e-10 * scale * scale * scale => {
                let x = -(inv * q.b);
                if x.iter().all(|c| c.is_finite()) && (x - mid).norm() <= 2.0 * edge_len {
                    x
                } else {
                    mid
                }
            }
            _ => mid,
        };
        (target, q.eval(&target) + self.length_weight * edge_len * edge_len)
    }

    fn candidate(&self, u: usize, v: usize) -> Candidate {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        let (_, cost) = self.placement(u, v);
        Candidate { cost, u: u as u32, v: v as u32, stamp: (self.version[u], self.version[v]) }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        let (u, v) = (c.u as usize, c.v as usize);
        self.alive[u] && self.alive[v] && (self.version[u], self.version[v]) == c.stamp
    }

    /// No surviving triangle flips or degenerates when both endpoints move to `target`.
    fn geometry_ok(&self, u: usize, v: usize, target: &Vec3) -> bool {
        for &w in &[u, v] {
            for &t in &self.vtris[w] {
                let tri = self.tris[t];
                if tri.contains(&u) && tri.contains(&v) {
                    continue;
                }
                let old = [self.pos[tri[0]], self.pos[tri[1]], self.pos[tri[2]]];
                let mut new = old;
                for k in 0..3 {
                    if tri[k] == u || tri[k] == v {
                        new[k] = *target;
                    }
                }
                let oc = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let nc = (new[1] - new[0]).cross(&(new[2] - new[0]));
                if oc.dot(&nc) < 0.0 || 0.5 * nc.norm() <= self.area_eps {
                    return false;
                }
            }
        }
        true
    }

    /// Merges `v` into `u`, placing `u` at `target`.
    fn collapse(&mut self, u: usize, v: usize, target: Vec3) {
        let incident = std::mem::take(&mut self.vtris[v]);
        for t in incident {
            let tri = self.tris[t];
            if tri.contains(&u) {
                self.tri_alive[t] = false;
                for x in tri {
                    if x != v {
                        self.vtris[x].retain(|s| *s != t);
                    }
                }
            } else {
                for x in &mut self.tris[t] {
                    if *x == v {
                        *x = u;
                    }
                }
                self.vtris[u].push(t);
            }
        }
        self.pos[u] = target;
        self.quadric[u] = self.quadric[u] + self.quadric[v];
        self.alive[v] = false;
        self.version[u] += 1;
        self.version[v] += 1;
        self.alive_count -= 1;
    }

    fn push_edges(&self, heap: &mut BinaryHeap<Reverse<Candidate>>, u: usize) {
        for w in self.one_ring(u) {
            heap.push(Reverse(self.candidate(u, w)));
        }
    }

    fn all_candidates(&self) -> BinaryHeap<Reverse<Candidate>> {
        let mut out = Vec::new();
        for (t, tri) in self.tris.iter().enumerate() {
            if !self.tri_alive[t] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                // Each edge once: from the triangle where it runs low-to-high,
                // or from its only triangle on the boundary.
                if a < b || self.edge_valence(a, b) == 1 {
                    out.push(Reverse(self.candidate(a, b)));
                }
            }
        }
        BinaryHeap::from(out)
    }

    /// Surviving vertices renumbered in increasing original id.
    fn compact(&self) -> (Vec<Vec3>, Vec<[usize; 3]>, Vec<usize>) {
        let mut remap = vec![usize::MAX; self.pos.len()];
        let mut source = Vec::with_capacity(self.alive_count);
        let mut pos = Vec::with_capacity(self.alive_count);
        for v in 0..self.pos.len() {
            if self.alive[v] {
                remap[v] = source.len();
                source.push(v);
                pos.push(self.pos[v]);
            }
        }
        let tris = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, a)| **a)
            .map(|(t, _)| t.map(|x| remap[x]))
            .collect();
        (pos, tris, source)
    }
}

fn check_topology(src: &Mesh, out: &Mesh) -> Result<()> {
    if out.euler_characteristic() != src.euler_characteristic() {
        return Err(Error::TopologyChanged(format!(
            "Euler characteristic {} became {}",
            src.euler_characteristic(),
            out.euler_characteristic()
        )));
    }
    if out.boundary_loop_count() != src.boundary_loop_count() {
        return Err(Error::TopologyChanged(format!(
            "{} boundary loops became {}",
            src.boundary_loop_count(),
            out.boundary_loop_count()
        )));
    }
    Ok(())
}

/// Greedy quadric-error edge collapse down to `max(4, ceil(ratio·|V|))` vertices.
///
/// Collapses failing the link condition, flipping a triangle or leaving one
/// with area at or below the degeneracy threshold are skipped. If the target
/// cannot be reached the best-effort result is returned with
/// `target_unreachable` set.
pub fn decimate_with(m: &Mesh, opts: &DecimateOptions) -> Result<CoarseMesh> {
    let ratio = opts.target_ratio;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParams(format!("target ratio {ratio} outside (0, 1]")));
    }
    let n = m.vertex_count();
    let wanted = (ratio * n as f64).ceil() as usize;
    let target = wanted.max(MIN_VERTICES);

    let mut w = Work::new(m);
    let mut collapses = 0;
    while w.alive_count > target {
        let mut heap = w.all_candidates();
        let before = collapses;
        while w.alive_count > target {
            let Some(Reverse(c)) = heap.pop() else { break };
            if !w.is_current(&c) {
                continue;
            }
            let (u, v) = (c.u as usize, c.v as usize);
            let (target, _) = w.placement(u, v);
            if collapse_is_legal(&w, u, v) != Some(true) || !w.geometry_ok(u, v, &target) {
                continue;
            }
            w.collapse(u, v, target);
            collapses += 1;
            w.push_edges(&mut heap, u);
            if opts.validate_steps {
                let (pos, tris, _) = w.compact();
                let step = Mesh::new(pos, tris)?;
                check_topology(m, &step)?;
            }
        }
        if collapses == before {
            break;
        }
    }

    let (pos, tris, source_vertex) = w.compact();
    let mesh = if collapses == 0 { m.clone() } else { Mesh::new(pos, tris)? };
    check_topology(m, &mesh)?;
    Ok(CoarseMesh {
        source_vertex_count: n,
        decimation_ratio: mesh.vertex_count() as f64 / n as f64,
        target_unreachable: mesh.vertex_count() > wanted,
        source_vertex,
        collapses,
        mesh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_same_topology(src: &Mesh, c: &CoarseMesh) {
        assert_eq!(c.mesh.euler_characteristic(), src.euler_characteristic());
        assert_eq!(c.mesh.boundary_loop_count(), src.boundary_loop_count());
        for e in 0..c.mesh.edge_count() {
            assert!(matches!(c.mesh.edge_valence(e), 1 | 2));
        }
        assert_eq!(c.source_vertex.len(), c.mesh.vertex_count());
    }

    #[test]
    fn icosphere_quarter() {
        let m = synth::icosphere(3).unwrap();
        assert_eq!(m.vertex_count(), 642);
        let c = decimate(&m, 0.25, 7).unwrap();
        assert_eq!(c.mesh.vertex_count(), 161);
        assert!(c.mesh.is_closed());
        assert_eq!(c.mesh.euler_characteristic(), 2);
        assert!(!c.target_unreachable);
        assert_same_topology(&m, &c);
        // Decimated points stay near the unit sphere.
        for p in c.mesh.positions() {
            assert!((p.norm() - 1.0).abs() < 0.05, "{}", p.norm());
        }
    }

    #[test]
    fn already_small_is_unchanged() {
        let m = synth::icosphere(1).unwrap();
        let c = decimate(&m, 1.0, 0).unwrap();
        assert_eq!(c.collapses, 0);
        assert_eq!(c.mesh.positions(), m.positions());
        assert_eq!(c.mesh.triangles(), m.triangles());
    }

    #[test]
    fn tetrahedron_is_unreachable() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        )
        .unwrap();
        for ratio in [0.01, 0.25, 0.5] {
            let c = decimate(&m, ratio, 1).unwrap();
            assert!(c.target_unreachable);
            assert_eq!(c.collapses, 0);
            assert_eq!(c.mesh.triangles(), m.triangles());
        }
    }

    #[test]
    fn small_closed_mesh_stops_at_minimum() {
        // Twelve vertices; the link condition stops collapses short of a tetrahedron.
        let m = synth::icosphere(0).unwrap();
        let c = decimate(&m, 0.01, 0).unwrap();
        assert!(c.mesh.vertex_count() >= 4);
        assert!(c.target_unreachable);
        assert_same_topology(&m, &c);
    }

    #[test]
    fn every_step_is_valid() {
        let opts = DecimateOptions { target_ratio: 0.1, validate_steps: true, ..Default::default() };
        for m in [synth::icosphere(2).unwrap(), synth::torus(12, 8).unwrap(), synth::disk(6).unwrap()] {
            let c = decimate_with(&m, &opts).unwrap();
            assert_same_topology(&m, &c);
        }
    }

    #[test]
    fn disk_keeps_one_boundary_loop() {
        let m = synth::disk(10).unwrap();
        let c = decimate(&m, 0.05, 0).unwrap();
        assert_eq!(c.mesh.boundary_loop_count(), 1);
        assert_eq!(c.mesh.euler_characteristic(), 1);
        // Boundary vertices stay on the unit circle up to the collapse placement.
        for v in 0..c.mesh.vertex_count() {
            if c.mesh.is_boundary_vertex(v) {
                let p = c.mesh.positions()[v];
                assert!((p.xy().norm() - 1.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn deterministic() {
        let m = synth::torus(20, 10).unwrap();
        let a = decimate(&m, 0.1, 3).unwrap();
        let b = decimate(&m, 0.1, 3).unwrap();
        assert_eq!(a.mesh.positions(), b.mesh.positions());
        assert_eq!(a.mesh.triangles(), b.mesh.triangles());
        assert_eq!(a.source_vertex, b.source_vertex);
    }

    #[test]
    fn randomized_runs_preserve_topology() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shapes = [synth::icosphere(3).unwrap(), synth::torus(24, 12).unwrap(), synth::disk(12).unwrap()];
        for run in 0..15 {
            let base = &shapes[run % 3];
            let h = 0.2 * base.mean_edge_length();
            let pos = base
                .positions()
                .iter()
                .map(|p| p + Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h)))
                .collect();
            let m = base.with_positions(pos).unwrap();
            let ratio = rng.random_range(0.02..0.5);
            let c = decimate(&m, ratio, run as u64).unwrap();
            assert_same_topology(&m, &c);
        }
    }

    #[test]
    fn rejects_bad_ratio() {
        let m = synth::icosphere(1).unwrap();
        assert!(matches!(decimate(&m, 0.0, 0), Err(Error::InvalidParams(_))));
        assert!(matches!(decimate(&m, 1.5, 0), Err(Error::InvalidParams(_))));
    }
}
