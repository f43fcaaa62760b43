use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

type Small = SmallVec<[usize; 16]>;

/// Read access to the triangles around a vertex, shared by immutable meshes
/// and the decimation work state.
pub(crate) trait Neighborhood {
    fn incident(&self, v: usize) -> &[usize];
    fn triangle(&self, t: usize) -> [usize; 3];
    fn on_boundary(&self, v: usize) -> bool;

    fn one_ring(&self, v: usize) -> Small {
        let mut out = Small::new();
        for &t in self.incident(v) {
            for x in self.triangle(t) {
                if x != v {
                    out.push(x);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn has_triangle(&self, a: usize, b: usize, c: usize) -> bool {
        self.incident(a).iter().any(|&t| {
            let tri = self.triangle(t);
            tri.contains(&b) && tri.contains(&c)
        })
    }

    fn edge_valence(&self, a: usize, b: usize) -> usize {
        self.incident(a).iter().filter(|&&t| self.triangle(t).contains(&b)).count()
    }
}

impl Neighborhood for Mesh {
    fn incident(&self, v: usize) -> &[usize] {
        self.vertex_fan(v)
    }

    fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles()[t]
    }

    fn on_boundary(&self, v: usize) -> bool {
        self.is_boundary_vertex(v)
    }
}

/// Link condition plus the boundary policy. `None` if `u`–`v` is not an edge.
///
/// The boundary is closed off by a virtual vertex joined to every boundary
/// vertex; the collapse is legal iff Lk(u) ∩ Lk(v) = Lk(uv) over both vertices
/// and edges of the links. Interior edges touching the boundary never collapse.
pub(crate) fn collapse_is_legal<N: Neighborhood>(n: &N, u: usize, v: usize) -> Option<bool> {
    let mut opposite: SmallVec<[usize; 2]> = SmallVec::new();
    for &t in n.incident(u) {
        let tri = n.triangle(t);
        if tri.contains(&v) {
            opposite.push(tri.into_iter().find(|&x| x != u && x != v).expect("three distinct ids"));
        }
    }
    if opposite.is_empty() {
        return None;
    }
    let boundary_edge = opposite.len() == 1;
    let (bu, bv) = (n.on_boundary(u), n.on_boundary(v));
    if !boundary_edge && (bu || bv) {
        return Some(false);
    }

    let ru = n.one_ring(u);
    let rv = n.one_ring(v);
    let mut common = Small::new();
    let (mut i, mut j) = (0, 0);
    while i < ru.len() && j < rv.len() {
        match ru[i].cmp(&rv[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common.push(ru[i]);
                i += 1;
                j += 1;
            }
        }
    }
    opposite.sort_unstable();
    if common.as_slice() != opposite.as_slice() {
        return Some(false);
    }

    if boundary_edge {
        // Edge {a, ω} lies in both links iff (u, a) and (v, a) are both boundary edges.
        let a = opposite[0];
        if n.edge_valence(u, a) == 1 && n.edge_valence(v, a) == 1 {
            return Some(false);
        }
    } else {
        let (a, b) = (opposite[0], opposite[1]);
        if n.has_triangle(u, a, b) && n.has_triangle(v, a, b) {
            return Some(false);
        }
    }
    Some(true)
}

/// Whether collapsing edge `(u, v)` keeps the mesh a 2-manifold with the same
/// topology and boundary structure.
pub fn link_condition(m: &Mesh, u: usize, v: usize) -> Result<bool> {
    if u >= m.vertex_count() || v >= m.vertex_count() {
        return Err(Error::EdgeNotFound(u, v));
    }
    collapse_is_legal(m, u, v).ok_or(Error::EdgeNotFound(u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    /// Brute force: perform the collapse combinatorially and validate the result.
    fn collapse_oracle(m: &Mesh, u: usize, w: usize) -> bool {
        let tris: Vec<[usize; 3]> = m
            .triangles()
            .iter()
            .filter(|t| !(t.contains(&u) && t.contains(&w)))
            .map(|t| t.map(|x| if x == w { u } else { x }))
            .collect();
        // Drop the removed vertex and renumber.
        let remap: Vec<usize> = (0..m.vertex_count()).map(|x| if x > w { x - 1 } else { x }).collect();
        let pos: Vec<Vec3> = m.positions().iter().enumerate().filter(|(i, _)| *i != w).map(|(_, p)| *p).collect();
        let tris: Vec<[usize; 3]> = tris.iter().map(|t| t.map(|x| remap[x])).collect();
        let interior_touching_boundary = m.find_edge(u, w).map(|e| !m.is_boundary_edge(e)).unwrap_or(false)
            && (m.is_boundary_vertex(u) || m.is_boundary_vertex(w));
        match Mesh::new(pos, tris) {
            Ok(c) => {
                c.euler_characteristic() == m.euler_characteristic()
                    && c.boundary_loop_count() == m.boundary_loop_count()
                    && !interior_touching_boundary
            }
            Err(_) => false,
        }
    }

    fn tetra() -> Mesh {
        Mesh::new(
            vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(0., 0., 1.)],
            vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        )
        .unwrap()
    }

    fn grid(n: usize) -> Mesh {
        let mut p = Vec::new();
        for j in 0..n {
            for i in 0..n {
                p.push(v(i as f64, j as f64, 0.0));
            }
        }
        let id = |i: usize, j: usize| j * n + i;
        let mut t = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh::new(p, t).unwrap()
    }

    /// Open tube with `k` vertices per ring and `rings` rings.
    fn tube(k: usize, rings: usize) -> Mesh {
        let mut p = Vec::new();
        for r in 0..rings {
            for i in 0..k {
                let a = i as f64 / k as f64 * std::f64::consts::TAU;
                p.push(v(a.cos(), a.sin(), r as f64));
            }
        }
        let id = |r: usize, i: usize| r * k + i % k;
        let mut t = Vec::new();
        for r in 0..rings - 1 {
            for i in 0..k {
                t.push([id(r, i), id(r, i + 1), id(r + 1, i + 1)]);
                t.push([id(r, i), id(r + 1, i + 1), id(r + 1, i)]);
            }
        }
        Mesh::new(p, t).unwrap()
    }

    fn torus(n: usize, m: usize) -> Mesh {
        let mut p = Vec::new();
        for i in 0..n {
            for j in 0..m {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                let b = j as f64 / m as f64 * std::f64::consts::TAU;
                p.push(v((2.0 + b.cos()) * a.cos(), (2.0 + b.cos()) * a.sin(), b.sin()));
            }
        }
        let id = |i: usize, j: usize| (i % n) * m + j % m;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..m {
                t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh::new(p, t).unwrap()
    }

    #[test]
    fn tetrahedron_edges_are_illegal() {
        let m = tetra();
        for &[a, b] in m.edges() {
            assert!(!link_condition(&m, a, b).unwrap());
            assert!(!collapse_oracle(&m, a, b));
        }
    }

    #[test]
    fn interior_grid_edge_is_legal() {
        let m = grid(5);
        assert!(link_condition(&m, 6, 7).unwrap());
        assert!(link_condition(&m, 12, 18).unwrap());
        assert!(collapse_oracle(&m, 12, 18));
    }

    #[test]
    fn fin_configuration_is_illegal() {
        // Middle ring of a three-sided tube: ring neighbours share a third vertex.
        let m = tube(3, 3);
        assert!(!link_condition(&m, 3, 4).unwrap());
        assert!(!collapse_oracle(&m, 3, 4));
    }

    #[test]
    fn missing_edge() {
        let m = grid(4);
        assert!(matches!(link_condition(&m, 0, 15), Err(Error::EdgeNotFound(0, 15))));
        assert!(matches!(link_condition(&m, 0, 99), Err(Error::EdgeNotFound(0, 99))));
    }

    #[test]
    fn agrees_with_brute_force_collapse() {
        for m in [tetra(), grid(4), grid(5), tube(3, 3), tube(4, 3), tube(5, 4), torus(3, 3), torus(4, 3), torus(5, 5)] {
            for &[a, b] in m.edges() {
                for (u, w) in [(a, b), (b, a)] {
                    assert_eq!(
                        link_condition(&m, u, w).unwrap(),
                        collapse_oracle(&m, u, w),
                        "edge ({u}, {w}) of a mesh with {} vertices",
                        m.vertex_count()
                    );
                }
            }
        }
    }
}
