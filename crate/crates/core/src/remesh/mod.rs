//! Topology-preserving decimation and the fine-to-coarse binding.

mod bvh;
mod correspondence;
mod decimate;
mod link;

pub use bvh::{closest_point_on_triangle, Bvh, Hit};
pub use correspondence::build_correspondence;
pub use decimate::{decimate, decimate_with, DecimateOptions, DEFAULT_TARGET_RATIO};
pub use link::link_condition;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::Vec3;

/// Barycentric coordinates within this distance outside the simplex are snapped.
pub const BARYCENTRIC_EPS: f64 = 1e-9;

/// A decimated mesh and where it came from.
#[derive(Debug, Clone)]
pub struct CoarseMesh {
    pub mesh: Mesh,
    pub source_vertex_count: usize,
    pub decimation_ratio: f64,
    /// Source vertex id of every surviving coarse vertex.
    pub source_vertex: Vec<usize>,
    /// Set when no legal collapse remained before the target count.
    pub target_unreachable: bool,
    pub collapses: usize,
}

impl CoarseMesh {
    /// Wraps a mesh as its own coarse version (no decimation).
    pub fn identity(mesh: Mesh) -> Self {
        let n = mesh.vertex_count();
        Self {
            mesh,
            source_vertex_count: n,
            decimation_ratio: 1.0,
            source_vertex: (0..n).collect(),
            target_unreachable: false,
            collapses: 0,
        }
    }

    /// Wraps an externally produced coarse mesh (e.g. loaded from disk).
    pub fn external(mesh: Mesh, source_vertex_count: usize) -> Self {
        let n = mesh.vertex_count();
        Self {
            source_vertex: Vec::new(),
            decimation_ratio: n as f64 / source_vertex_count.max(1) as f64,
            mesh,
            source_vertex_count,
            target_unreachable: false,
            collapses: 0,
        }
    }
}

/// Binding of one fine vertex to a coarse triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binding {
    pub triangle: usize,
    pub barycentric: [f64; 3],
    /// Offset from the barycentric base point, in the triangle's frame.
    pub offset: Vec3,
    /// Bound without the normal-compatibility filter. Not persisted.
    pub fallback: bool,
}

/// One binding per fine vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correspondence {
    pub bindings: Vec<Binding>,
}

impl Correspondence {
    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn fallback_count(&self) -> usize {
        self.bindings.iter().filter(|b| b.fallback).count()
    }

    /// Checks triangle ids against `coarse` and the barycentric invariants.
    pub fn validate(&self, coarse: &Mesh) -> Result<()> {
        for (i, b) in self.bindings.iter().enumerate() {
            if b.triangle >= coarse.triangle_count() {
                return Err(Error::IndexOutOfRange { index: b.triangle, len: coarse.triangle_count() });
            }
            let sum: f64 = b.barycentric.iter().sum();
            let in_range = b.barycentric.iter().all(|&x| (-BARYCENTRIC_EPS..=1.0 + BARYCENTRIC_EPS).contains(&x));
            if !in_range || (sum - 1.0).abs() > BARYCENTRIC_EPS || !b.offset.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(())
    }

    /// Fine vertices whose offset exceeds `10 ×` the mean coarse edge length
    /// while bound through the normal filter.
    pub fn oversized_offsets(&self, coarse: &Mesh) -> Vec<usize> {
        let bound = 10.0 * coarse.mean_edge_length();
        self.bindings
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.fallback && b.offset.norm() > bound)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Clamps tiny negative coordinates to zero and renormalises.
pub fn snap_barycentric(mut b: [f64; 3]) -> [f64; 3] {
    for x in &mut b {
        if *x < 0.0 && *x >= -BARYCENTRIC_EPS {
            *x = 0.0;
        }
    }
    let s: f64 = b.iter().sum();
    if s > 0.0 && s != 1.0 {
        for x in &mut b {
            *x /= s;
        }
    }
    b
}
