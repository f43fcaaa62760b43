//! Immutable manifold triangle meshes.
//!
//! A [`Mesh`] is a vertex buffer plus a shared, validated [`Topology`]. Every
//! accepted mesh is an oriented 2-manifold (possibly with boundary) made of a
//! single connected component: each edge touches one or two triangles, each
//! vertex sees exactly one fan of triangles, and the two triangles of an
//! interior edge traverse it in opposite directions.
//!
//! Deformed copies share the topology through [`Mesh::with_positions`], which
//! makes [`check_deformation_compatible`] a pointer comparison in the common
//! case.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Vec3;

/// Marker for "no second triangle" on a boundary edge.
pub const NONE: usize = usize::MAX;

/// Relative factor of the degenerate-area threshold, applied to the squared
/// bounding-box diagonal.
pub const AREA_EPS_FACTOR: f64 = 1e-12;

/// Connectivity shared between a rest mesh and all of its deformations.
#[derive(Debug)]
pub struct Topology {
    n_vertices: usize,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_tris: Vec<[usize; 2]>,
    /// `tri_edges[t][k]` is the edge opposite corner `k`.
    tri_edges: Vec<[usize; 3]>,
    vert_edge_offsets: Vec<usize>,
    vert_edges: Vec<usize>,
    fan_offsets: Vec<usize>,
    fans: Vec<usize>,
    boundary_vertex: Vec<bool>,
    boundary_edges: usize,
    boundary_loops: usize,
}

/// A validated triangle mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    positions: Vec<Vec3>,
    topo: Arc<Topology>,
}

/// One real value per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::SizeMismatch { expected: mesh.vertex_count(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.positions().iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// One weight per undirected edge, indexed like [`Mesh::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights(pub Vec<f64>);

impl EdgeWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_negative(&self) -> bool {
        self.0.iter().any(|&w| w < 0.0)
    }

    pub fn clamped_non_negative(&self) -> Self {
        Self(self.0.iter().map(|&w| w.max(0.0)).collect())
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn csr<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I, count: usize) -> (Vec<usize>, Vec<usize>) {
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    debug_assert_eq!(pairs.len(), count);
    let mut offsets = vec![0usize; n + 1];
    for &(k, _) in &pairs {
        offsets[k + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut values = vec![0usize; pairs.len()];
    for (k, v) in pairs {
        values[cursor[k]] = v;
        cursor[k] += 1;
    }
    (offsets, values)
}

impl Topology {
    fn build(n_vertices: usize, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n_vertices {
                    return Err(Error::IndexOutOfRange { index: v, len: n_vertices });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle(t));
            }
        }

        // Same vertex set twice is rejected whatever the winding.
        let mut keyed: Vec<([usize; 3], usize)> = triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let mut k = *tri;
                k.sort_unstable();
                (k, t)
            })
            .collect();
        keyed.sort_unstable();
        for w in keyed.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateTriangle(w[0].1.max(w[1].1)));
            }
        }

        // Half-edges keyed by their undirected edge.
        let mut half: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(triangles.len() * 3);
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                half.push((a.min(b), a.max(b), t, k));
            }
        }
        half.sort_unstable();

        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < half.len() {
            let mut j = i + 1;
            while j < half.len() && half[j].0 == half[i].0 && half[j].1 == half[i].1 {
                j += 1;
            }
            if j - i > 2 {
                return Err(Error::NonManifoldEdge(half[i].0, half[i].1));
            }
            groups.push((i, j));
            i = j;
        }

        let mut edges = Vec::with_capacity(groups.len());
        let mut edge_tris = Vec::with_capacity(groups.len());
        let mut tri_edges = vec![[NONE; 3]; triangles.len()];
        for (e, &(i, j)) in groups.iter().enumerate() {
            let (lo, hi, t0, k0) = half[i];
            edges.push([lo, hi]);
            tri_edges[t0][k0] = e;
            if j - i == 2 {
                let (_, _, t1, k1) = half[i + 1];
                tri_edges[t1][k1] = e;
                let dir0 = triangles[t0][(k0 + 1) % 3];
                let dir1 = triangles[t1][(k1 + 1) % 3];
                if dir0 == dir1 {
                    return Err(Error::InconsistentOrientation(lo, hi));
                }
                edge_tris.push([t0, t1]);
            } else {
                edge_tris.push([t0, NONE]);
            }
        }

        let mut ds = DisjointSet::new(n_vertices);
        for e in &edges {
            ds.union(e[0], e[1]);
        }
        let mut roots: Vec<usize> = (0..n_vertices).map(|v| ds.find(v)).collect();
        roots.sort_unstable();
        roots.dedup();
        if roots.len() != 1 {
            return Err(Error::Disconnected(roots.len()));
        }

        let (vert_edge_offsets, vert_edges) = csr(
            n_vertices,
            edges.iter().enumerate().flat_map(|(e, &[a, b])| [(a, e), (b, e)]),
            edges.len() * 2,
        );
        let (vt_offsets, vt) = csr(
            n_vertices,
            triangles.iter().enumerate().flat_map(|(t, tri)| tri.map(|v| (v, t))),
            triangles.len() * 3,
        );

        let mut topo = Topology {
            n_vertices,
            triangles,
            edges,
            edge_tris,
            tri_edges,
            vert_edge_offsets,
            vert_edges,
            fan_offsets: vt_offsets,
            fans: Vec::new(),
            boundary_vertex: vec![false; n_vertices],
            boundary_edges: 0,
            boundary_loops: 0,
        };

        let mut fans = Vec::with_capacity(vt.len());
        for v in 0..n_vertices {
            let incident = &vt[topo.fan_offsets[v]..topo.fan_offsets[v + 1]];
            let fan = topo.order_fan(v, incident)?;
            fans.extend_from_slice(&fan);
        }
        topo.fans = fans;

        let mut boundary_ds = DisjointSet::new(n_vertices);
        for (e, et) in topo.edge_tris.iter().enumerate() {
            if et[1] == NONE {
                let [a, b] = topo.edges[e];
                topo.boundary_vertex[a] = true;
                topo.boundary_vertex[b] = true;
                topo.boundary_edges += 1;
                boundary_ds.union(a, b);
            }
        }
        let mut loop_roots: Vec<usize> = (0..n_vertices)
            .filter(|&v| topo.boundary_vertex[v])
            .map(|v| boundary_ds.find(v))
            .collect();
        loop_roots.sort_unstable();
        loop_roots.dedup();
        topo.boundary_loops = loop_roots.len();
        Ok(topo)
    }

    fn corner(&self, t: usize, v: usize) -> usize {
        let tri = &self.triangles[t];
        if tri[0] == v {
            0
        } else if tri[1] == v {
            1
        } else {
            2
        }
    }

    fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let (lo, hi) = (a.min(b), a.max(b));
        self.vert_edges[self.vert_edge_offsets[a]..self.vert_edge_offsets[a + 1]]
            .iter()
            .copied()
            .find(|&e| self.edges[e] == [lo, hi])
    }

    fn across(&self, e: usize, t: usize) -> usize {
        let [t0, t1] = self.edge_tris[e];
        if t0 == t {
            t1
        } else {
            t0
        }
    }

    /// Orders the triangles around `v` counter-clockwise, starting at the
    /// boundary when there is one. Fails if they form more than one fan.
    fn order_fan(&self, v: usize, incident: &[usize]) -> Result<Vec<usize>> {
        // For triangle (v, a, b) the counter-clockwise successor shares edge
        // {v, b} and the predecessor shares edge {v, a}.
        let prev_edge = |t: usize| {
            let k = self.corner(t, v);
            self.edge_between(v, self.triangles[t][(k + 1) % 3]).expect("edge of triangle")
        };
        let next_edge = |t: usize| {
            let k = self.corner(t, v);
            self.edge_between(v, self.triangles[t][(k + 2) % 3]).expect("edge of triangle")
        };
        let start = incident
            .iter()
            .copied()
            .find(|&t| self.edge_tris[prev_edge(t)][1] == NONE)
            .unwrap_or(incident[0]);
        let mut fan = Vec::with_capacity(incident.len());
        let mut t = start;
        loop {
            fan.push(t);
            let nt = self.across(next_edge(t), t);
            if nt == NONE || nt == start {
                break;
            }
            if fan.len() > incident.len() {
                return Err(Error::NonManifoldVertex(v));
            }
            t = nt;
        }
        if fan.len() != incident.len() {
            return Err(Error::NonManifoldVertex(v));
        }
        Ok(fan)
    }
}

impl Mesh {
    /// Validates connectivity and builds all derived adjacency.
    pub fn new(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        let topo = Topology::build(positions.len(), triangles)?;
        Ok(Self { positions, topo: Arc::new(topo) })
    }

    /// A deformation of this mesh: same connectivity, new positions.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.vertex_count() {
            return Err(Error::SizeMismatch { expected: self.vertex_count(), found: positions.len() });
        }
        Ok(Self { positions, topo: Arc::clone(&self.topo) })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<Vec3> {
        self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.topo.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.topo.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.topo.n_vertices
    }

    pub fn triangle_count(&self) -> usize {
        self.topo.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.topo.edges.len()
    }

    /// Triangles incident on edge `e`; the second entry is [`NONE`] on the boundary.
    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.topo.edge_tris[e]
    }

    /// Number of triangles incident on edge `e` (1 or 2).
    pub fn edge_valence(&self, e: usize) -> usize {
        if self.topo.edge_tris[e][1] == NONE {
            1
        } else {
            2
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.topo.edge_tris[e][1] == NONE
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.topo.boundary_vertex[v]
    }

    /// Edge opposite corner `k` of triangle `t`.
    pub fn triangle_edge(&self, t: usize, k: usize) -> usize {
        self.topo.tri_edges[t][k]
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.topo.boundary_edges
    }

    pub fn boundary_loop_count(&self) -> usize {
        self.topo.boundary_loops
    }

    pub fn is_closed(&self) -> bool {
        self.topo.boundary_edges == 0
    }

    /// Triangles around `v` in counter-clockwise order.
    pub fn vertex_fan(&self, v: usize) -> &[usize] {
        &self.topo.fans[self.topo.fan_offsets[v]..self.topo.fan_offsets[v + 1]]
    }

    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.topo.vert_edges[self.topo.vert_edge_offsets[v]..self.topo.vert_edge_offsets[v + 1]]
    }

    /// One-ring neighbours of `v`, in edge order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.vertex_edges(v).iter().map(move |&e| {
            let [a, b] = self.topo.edges[e];
            if a == v {
                b
            } else {
                a
            }
        })
    }

    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.vertex_count() || v >= self.vertex_count() {
            return None;
        }
        self.topo.edge_between(u, v)
    }

    pub fn shares_topology(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.topo, &other.topo)
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        bounding_box(&self.positions)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Areas at or below this value count as degenerate.
    pub fn area_epsilon(&self) -> f64 {
        let d = self.bbox_diagonal();
        AREA_EPS_FACTOR * d * d
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.triangle_count() as i64
    }

    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        self.topo.triangles[t].map(|v| self.positions[v])
    }

    /// Unnormalised normal, twice the area in length.
    pub fn triangle_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_points(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.triangle_cross(t).norm()
    }

    pub fn is_degenerate(&self, t: usize) -> bool {
        self.triangle_area(t) <= self.area_epsilon()
    }

    /// Unit normal oriented by the right-hand rule over the vertex order.
    pub fn triangle_normal(&self, t: usize) -> Result<Vec3> {
        let c = self.triangle_cross(t);
        let area = 0.5 * c.norm();
        if !(area > self.area_epsilon()) {
            return Err(Error::DegenerateTriangle(t));
        }
        Ok(c / (2.0 * area))
    }

    /// Gradient of the piecewise-linear interpolant of `f` on triangle `t`.
    pub fn triangle_gradient(&self, f: &ScalarField, t: usize) -> Result<Vec3> {
        let n = self.triangle_normal(t)?;
        let area = self.triangle_area(t);
        let tri = self.topo.triangles[t];
        let p = self.triangle_points(t);
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let e = p[(i + 2) % 3] - p[(i + 1) % 3];
            g += f.0[tri[i]] * n.cross(&e);
        }
        Ok(g / (2.0 * area))
    }

    /// Cotangent weights `(cot α + cot β) / 2`; boundary edges keep their single term.
    pub fn cotangent_weights(&self) -> Result<EdgeWeights> {
        let eps = self.area_epsilon();
        let mut w = vec![0.0; self.edge_count()];
        for t in 0..self.triangle_count() {
            let p = self.triangle_points(t);
            let cross = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            if !(0.5 * cross > eps) {
                return Err(Error::DegenerateTriangle(t));
            }
            for k in 0..3 {
                let a = p[(k + 1) % 3] - p[k];
                let b = p[(k + 2) % 3] - p[k];
                w[self.topo.tri_edges[t][k]] += 0.5 * a.dot(&b) / cross;
            }
        }
        Ok(EdgeWeights(w))
    }

    /// Area-weighted vertex normals (unnormalised sum of triangle cross products).
    pub fn area_weighted_vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertex_count()];
        for (t, tri) in self.topo.triangles.iter().enumerate() {
            let c = self.triangle_cross(t);
            for &v in tri {
                n[v] += c;
            }
        }
        n
    }

    pub fn mean_edge_length(&self) -> f64 {
        mean_edge_length(self, &self.positions)
    }
}

pub fn mean_edge_length(mesh: &Mesh, positions: &[Vec3]) -> f64 {
    let total: f64 = mesh.edges().iter().map(|&[a, b]| (positions[a] - positions[b]).norm()).sum();
    total / mesh.edge_count() as f64
}

pub fn bounding_box(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    let (lo, hi) = bounding_box(points);
    (hi - lo).norm()
}

/// Same vertex count and identical triangle list under the identity map.
pub fn check_deformation_compatible(a: &Mesh, b: &Mesh) -> bool {
    a.shares_topology(b)
        || (a.vertex_count() == b.vertex_count() && a.triangles() == b.triangles())
}
