//! Per-triangle local reference frames and detail encoding.
//!
//! Each coarse triangle carries a right-handed orthonormal frame: the first
//! axis runs along the edge leaving its lowest-id vertex, the third is the
//! triangle normal. A fine vertex bound to a coarse triangle stores its offset
//! from the barycentric base point in that frame, so rebuilding it on a
//! deformed coarse mesh only needs the deformed frame.

use rayon::prelude::*;

use crate::arap::fit_rotation;
use crate::error::{Error, Result};
use crate::mesh::{check_deformation_compatible, Mesh, NONE};
use crate::remesh::{CoarseMesh, Correspondence};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    /// Columns: tangent, bitangent, normal.
    pub axes: Mat3,
}

impl Frame {
    pub fn normal(&self) -> Vec3 {
        self.axes.column(2).into_owned()
    }

    pub fn to_local(&self, v: &Vec3) -> Vec3 {
        self.axes.transpose() * v
    }

    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.axes * v
    }
}

fn lowest_corner(tri: &[usize; 3]) -> usize {
    (0..3).min_by_key(|&k| tri[k]).expect("three corners")
}

/// Edge vectors of `t` in anchor order: lowest-id corner to the next, then around.
fn anchor_edges(m: &Mesh, t: usize) -> [Vec3; 3] {
    let tri = m.triangles()[t];
    let k = lowest_corner(&tri);
    let p = m.triangle_points(t);
    [p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[(k + 1) % 3], p[k] - p[(k + 2) % 3]]
}

fn frame_from(origin: Vec3, normal: Vec3, tangent: Vec3) -> Frame {
    let e1 = tangent.normalize();
    let e2 = normal.cross(&e1);
    Frame { origin, axes: Mat3::from_columns(&[e1, e2, normal]) }
}

fn centroid(m: &Mesh, t: usize) -> Vec3 {
    m.triangle_points(t).iter().sum::<Vec3>() / 3.0
}

/// Frame of triangle `t`; degenerate triangles borrow the area-weighted
/// normal of their non-degenerate edge neighbours.
pub fn compute_frame(m: &Mesh, t: usize) -> Result<Frame> {
    let eps = m.area_epsilon();
    let origin = centroid(m, t);
    let cross = m.triangle_cross(t);
    if 0.5 * cross.norm() > eps {
        let normal = cross.normalize();
        return Ok(frame_from(origin, normal, anchor_edges(m, t)[0]));
    }

    let mut sum = Vec3::zeros();
    let mut fallback_tangent = None;
    for k in 0..3 {
        let e = m.triangle_edge(t, k);
        let [a, b] = m.edge_triangles(e);
        let nb = if a == t { b } else { a };
        if nb == NONE {
            continue;
        }
        let c = m.triangle_cross(nb);
        if 0.5 * c.norm() > eps {
            sum += c;
            fallback_tangent.get_or_insert(anchor_edges(m, nb)[0]);
        }
    }
    let len = sum.norm();
    if !(len > 0.0) {
        return Err(Error::DegenerateNeighborhood(t));
    }
    let normal = sum / len;
    let scale = m.bbox_diagonal();
    let tangent = anchor_edges(m, t)
        .into_iter()
        .chain(fallback_tangent)
        .map(|e| e - normal * normal.dot(&e))
        .find(|e| e.norm() > 1e-12 * scale)
        .ok_or(Error::DegenerateNeighborhood(t))?;
    Ok(frame_from(origin, normal, tangent))
}

pub fn compute_frames(m: &Mesh) -> Result<Vec<Frame>> {
    (0..m.triangle_count()).into_par_iter().map(|t| compute_frame(m, t)).collect()
}

/// Frames of a deformed mesh. Where a whole neighbourhood has collapsed the
/// rest frame is carried over by the rotation best fitting the one-rings of
/// the triangle's vertices.
pub fn deformed_frames(rest: &Mesh, deformed: &Mesh) -> Result<Vec<Frame>> {
    if !check_deformation_compatible(rest, deformed) {
        return Err(Error::IncompatibleCoarse);
    }
    (0..deformed.triangle_count())
        .into_par_iter()
        .map(|t| match compute_frame(deformed, t) {
            Err(Error::DegenerateNeighborhood(_)) => {
                let rest_frame = compute_frame(rest, t)?;
                let mut re = Vec::new();
                let mut de = Vec::new();
                for &v in &deformed.triangles()[t] {
                    for n in deformed.neighbors(v) {
                        re.push(rest.positions()[n] - rest.positions()[v]);
                        de.push(deformed.positions()[n] - deformed.positions()[v]);
                    }
                }
                let r = fit_rotation(&re, &de, &vec![1.0; re.len()]);
                Ok(Frame { origin: centroid(deformed, t), axes: r * rest_frame.axes })
            }
            other => other,
        })
        .collect()
}

fn base_point(m: &Mesh, t: usize, bary: &[f64; 3]) -> Vec3 {
    let p = m.triangle_points(t);
    p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2]
}

/// Fills in every binding's offset from the fine rest positions.
pub fn encode_details(fine: &Mesh, coarse: &CoarseMesh, corr: &Correspondence) -> Result<Correspondence> {
    if corr.len() != fine.vertex_count() {
        return Err(Error::SizeMismatch { expected: fine.vertex_count(), found: corr.len() });
    }
    let cm = &coarse.mesh;
    corr.validate(cm)?;
    let frames = compute_frames(cm)?;
    let mut out = corr.clone();
    out.bindings.par_iter_mut().zip(fine.positions().par_iter()).for_each(|(b, p)| {
        let q = base_point(cm, b.triangle, &b.barycentric);
        b.offset = frames[b.triangle].to_local(&(p - q));
    });
    Ok(out)
}

/// Rebuilds fine positions on a deformed coarse mesh.
pub fn reconstruct(coarse_rest: &Mesh, coarse_deformed: &Mesh, corr: &Correspondence) -> Result<Vec<Vec3>> {
    corr.validate(coarse_rest)?;
    let frames = deformed_frames(coarse_rest, coarse_deformed)?;
    Ok(corr
        .bindings
        .par_iter()
        .map(|b| base_point(coarse_deformed, b.triangle, &b.barycentric) + frames[b.triangle].to_world(&b.offset))
        .collect())
}

/// Per-fine-vertex point of the coarse surface the vertex is bound to,
/// evaluated on `coarse` (rest or deformed).
pub fn bound_points(coarse: &Mesh, corr: &Correspondence) -> Vec<Vec3> {
    corr.bindings.par_iter().map(|b| base_point(coarse, b.triangle, &b.barycentric)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::remesh::Binding;
    use nalgebra::{Rotation3, Unit};

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn assert_orthonormal(f: &Frame) {
        assert!((f.axes.transpose() * f.axes - Mat3::identity()).norm() < 1e-10);
        assert!((f.axes.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unit_triangle_frame() {
        let m = Mesh::new(vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)], vec![[0, 1, 2]]).unwrap();
        let f = compute_frame(&m, 0).unwrap();
        assert!((f.axes - Mat3::identity()).norm() < 1e-15);
        assert!((f.origin - v(1. / 3., 1. / 3., 0.)).norm() < 1e-15);
    }

    #[test]
    fn anchor_follows_lowest_id() {
        // Lowest id sits at corner 1: anchor edge runs 0 → 2 (next in triangle order).
        let m = Mesh::new(vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)], vec![[1, 0, 2]]).unwrap();
        let f = compute_frame(&m, 0).unwrap();
        assert!((f.axes.column(0) - v(0., 1., 0.)).norm() < 1e-15);
        assert!((f.normal() - v(0., 0., -1.)).norm() < 1e-15);
        assert_orthonormal(&f);
    }

    #[test]
    fn frame_is_rigidly_equivariant() {
        let p = vec![v(0.2, -0.1, 0.3), v(1.4, 0.2, 0.0), v(0.1, 0.9, 0.5)];
        let m = Mesh::new(p.clone(), vec![[0, 1, 2]]).unwrap();
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(v(1., 2., -0.5)), 2.1);
        let t = v(3., -1., 7.);
        let moved = m.with_positions(p.iter().map(|x| r * x + t).collect()).unwrap();
        let a = compute_frame(&m, 0).unwrap();
        let b = compute_frame(&moved, 0).unwrap();
        assert!((b.axes - r.matrix() * a.axes).norm() < 1e-10);
        assert!((b.origin - (r * a.origin + t)).norm() < 1e-10);
    }

    #[test]
    fn sliver_uses_neighbour_average() {
        // Zero-area triangle [0, 1, 2] on the x axis with a neighbour across each edge.
        let p = vec![v(0., 0., 0.), v(1., 0., 0.), v(2., 0., 0.), v(1., 1., 0.1), v(0.5, -1., 0.1), v(1.5, -1., 0.1)];
        let m = Mesh::new(p, vec![[0, 1, 2], [1, 0, 4], [2, 1, 5], [0, 2, 3]]).unwrap();
        assert!(m.is_degenerate(0));
        let f = compute_frame(&m, 0).unwrap();
        assert_orthonormal(&f);
        let sum: Vec3 = [1, 2, 3].iter().map(|&t| m.triangle_cross(t)).sum();
        assert!((f.normal() - sum.normalize()).norm() < 1e-12);
        assert!(f.axes.column(0).dot(&sum).abs() < 1e-12);
    }

    #[test]
    fn isolated_degenerate_triangle_fails() {
        let m = Mesh::new(vec![v(0., 0., 0.), v(1., 0., 0.), v(2., 0., 0.)], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(compute_frame(&m, 0), Err(Error::DegenerateNeighborhood(0))));
    }

    fn one_triangle_coarse() -> CoarseMesh {
        let m = Mesh::new(vec![v(0., 0., 0.), v(2., 0., 0.), v(0., 2., 0.)], vec![[0, 1, 2]]).unwrap();
        CoarseMesh::identity(m)
    }

    #[test]
    fn encode_offsets() {
        let coarse = one_triangle_coarse();
        let h = 0.37;
        let q = v(0.5, 0.5, 0.0);
        let fine = Mesh::new(vec![q, q + v(0., 0., h), v(1., 0.5, 0.)], vec![[0, 2, 1]]).unwrap();
        let corr = Correspondence {
            bindings: vec![
                Binding { triangle: 0, barycentric: [0.5, 0.25, 0.25], offset: Vec3::zeros(), fallback: false },
                Binding { triangle: 0, barycentric: [0.5, 0.25, 0.25], offset: Vec3::zeros(), fallback: false },
                Binding { triangle: 0, barycentric: [0.25, 0.5, 0.25], offset: Vec3::zeros(), fallback: false },
            ],
        };
        let enc = encode_details(&fine, &coarse, &corr).unwrap();
        assert!(enc.bindings[0].offset.norm() < 1e-15);
        assert!((enc.bindings[1].offset - v(0., 0., h)).norm() < 1e-10);
        let back = reconstruct(&coarse.mesh, &coarse.mesh, &enc).unwrap();
        for (a, b) in back.iter().zip(fine.positions()) {
            assert!((a - b).norm() < 1e-12);
        }
        // Zero offset lands on the deformed triangle's plane.
        let r = Rotation3::from_axis_angle(&Vec3::y_axis(), 0.7);
        let moved = coarse.mesh.with_positions(coarse.mesh.positions().iter().map(|p| r * p).collect()).unwrap();
        let out = reconstruct(&coarse.mesh, &moved, &enc).unwrap();
        let n = moved.triangle_normal(0).unwrap();
        assert!((out[0] - moved.positions()[0]).dot(&n).abs() < 1e-9);
    }

    #[test]
    fn reconstruct_rejects_other_connectivity() {
        let coarse = one_triangle_coarse();
        let other = Mesh::new(coarse.mesh.positions().to_vec(), vec![[0, 2, 1]]).unwrap();
        let corr = Correspondence {
            bindings: vec![Binding { triangle: 0, barycentric: [1., 0., 0.], offset: Vec3::zeros(), fallback: false }],
        };
        assert!(matches!(reconstruct(&coarse.mesh, &other, &corr), Err(Error::IncompatibleCoarse)));
    }

    #[test]
    fn collapsed_neighbourhood_uses_fitted_rotation() {
        let coarse = one_triangle_coarse();
        let collapsed = coarse.mesh.with_positions(vec![v(1., 1., 1.); 3]).unwrap();
        let frames = deformed_frames(&coarse.mesh, &collapsed).unwrap();
        let f = &frames[0];
        assert!((f.axes.transpose() * f.axes - Mat3::identity()).norm() < 1e-10);
        assert!((f.axes.determinant() - 1.0).abs() < 1e-10);
    }
}
