use rayon::prelude::*;

use super::{snap_barycentric, Binding, Bvh, CoarseMesh, Correspondence};
use crate::error::{Error, Result};
use crate::lrf::encode_details;
use crate::mesh::Mesh;
use crate::Vec3;

/// Normal-compatible search radius, in mean coarse edge lengths.
const FILTER_RADIUS: f64 = 2.0;

/// Binds every fine vertex to the closest coarse triangle whose normal agrees
/// with the vertex normal, then encodes offsets in the triangle frames.
///
/// Vertices with no compatible triangle within the search radius bind to the
/// globally closest triangle and are flagged as fallbacks.
pub fn build_correspondence(fine: &Mesh, coarse: &CoarseMesh) -> Result<Correspondence> {
    let cm = &coarse.mesh;
    if cm.triangle_count() == 0 {
        return Err(Error::EmptyCoarse);
    }
    let bvh = Bvh::new(cm);
    let face_normals: Vec<Vec3> = (0..cm.triangle_count()).map(|t| cm.triangle_cross(t)).collect();
    let vertex_normals = fine.area_weighted_vertex_normals();
    let radius = FILTER_RADIUS * cm.mean_edge_length();
    let r2 = radius * radius;

    let bindings: Vec<Binding> = fine
        .positions()
        .par_iter()
        .zip(vertex_normals.par_iter())
        .map(|(p, n)| {
            let filtered = bvh.closest_filtered(p, r2, |t| face_normals[t].dot(n) > 0.0);
            let (hit, fallback) = match filtered {
                Some(h) => (h, false),
                None => (bvh.closest(p).expect("non-empty hierarchy"), true),
            };
            Binding {
                triangle: hit.triangle,
                barycentric: snap_barycentric(hit.barycentric),
                offset: Vec3::zeros(),
                fallback,
            }
        })
        .collect();

    encode_details(fine, coarse, &Correspondence { bindings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lrf::reconstruct;
    use crate::remesh::decimate;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_binds_to_incident_corner() {
        let m = synth::torus(12, 8).unwrap();
        let corr = build_correspondence(&m, &CoarseMesh::identity(m.clone())).unwrap();
        for (v, b) in corr.bindings.iter().enumerate() {
            let tri = m.triangles()[b.triangle];
            let k = tri.iter().position(|&x| x == v).expect("incident triangle");
            assert_eq!(b.barycentric[k], 1.0);
            assert!(b.offset.norm() < 1e-12);
            assert!(!b.fallback);
        }
    }

    #[test]
    fn displaced_centroid() {
        let coarse = synth::icosphere(1).unwrap();
        let t = 17;
        let [a, b, c] = coarse.triangle_points(t);
        let h = 0.01;
        let n = coarse.triangle_normal(t).unwrap();
        // A small fine triangle hovering over the coarse one, same orientation.
        let centroid = (a + b + c) / 3.0;
        let lift = |p: Vec3| (p - centroid) * 0.1 + centroid + n * h;
        let fine = Mesh::new(vec![centroid + n * h, lift(b), lift(c)], vec![[0, 1, 2]]).unwrap();
        let corr = build_correspondence(&fine, &CoarseMesh::identity(coarse)).unwrap();
        let bind = corr.bindings[0];
        assert_eq!(bind.triangle, t);
        for x in bind.barycentric {
            assert!((x - 1.0 / 3.0).abs() < 1e-9);
        }
        assert!((bind.offset - Vec3::new(0.0, 0.0, h)).norm() < 1e-9);
    }

    #[test]
    fn reprojection_round_trip() {
        let m = synth::torus(40, 20).unwrap();
        let coarse = decimate(&m, 0.1, 0).unwrap();
        let corr = build_correspondence(&m, &coarse).unwrap();
        corr.validate(&coarse.mesh).unwrap();
        let out = reconstruct(&coarse.mesh, &coarse.mesh, &corr).unwrap();
        let tol = 1e-9 * m.bbox_diagonal();
        for (p, q) in out.iter().zip(m.positions()) {
            assert!((p - q).norm() <= tol);
        }
        for b in &corr.bindings {
            assert!((b.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(corr.oversized_offsets(&coarse.mesh).is_empty());
    }

    #[test]
    fn folded_slab_binds_to_own_sheet() {
        // Thin closed slab: top sheet faces +z, bottom faces -z, gap far below
        // the coarse edge length. Fine sheets are bumped by more than the gap so
        // plain closest-point would cross over.
        let n_coarse = 8;
        let coarse = synth::slab(n_coarse, n_coarse, 1.0 / n_coarse as f64 * 0.01).unwrap();
        let gap = coarse.bbox().1.z - coarse.bbox().0.z;
        let fine_base = synth::slab(4 * n_coarse, 4 * n_coarse, gap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pos: Vec<Vec3> = fine_base
            .positions()
            .iter()
            .map(|p| {
                let interior = p.x > 1e-9 && p.x < 1.0 - 1e-9 && p.y > 1e-9 && p.y < 1.0 - 1e-9;
                if interior {
                    p + Vec3::new(0.0, 0.0, rng.random_range(-3.0 * gap..3.0 * gap))
                } else {
                    *p
                }
            })
            .collect();
        let fine = fine_base.with_positions(pos).unwrap();
        let corr = build_correspondence(&fine, &CoarseMesh::identity(coarse.clone())).unwrap();
        let normals = fine.area_weighted_vertex_normals();
        let mut crossings = 0;
        let mut crossings_unfiltered = 0;
        let bvh = Bvh::new(&coarse);
        for (v, b) in corr.bindings.iter().enumerate() {
            let fine_up = normals[v].z > 0.5 * normals[v].norm();
            let fine_down = normals[v].z < -0.5 * normals[v].norm();
            let sheet = coarse.triangle_cross(b.triangle).z;
            if (fine_up && sheet < 0.0) || (fine_down && sheet > 0.0) {
                crossings += 1;
            }
            let raw = coarse.triangle_cross(bvh.closest(&fine.positions()[v]).unwrap().triangle).z;
            if (fine_up && raw < 0.0) || (fine_down && raw > 0.0) {
                crossings_unfiltered += 1;
            }
        }
        assert_eq!(crossings, 0);
        // The scenario is only meaningful if unfiltered search does cross.
        assert!(crossings_unfiltered > 0);
    }
}
