//! Edge error, volume, distances and run reports.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{check_deformation_compatible, Mesh};
use crate::Vec3;

/// Mean, median and max of a set of non-negative values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        Self { mean: values.iter().sum::<f64>() / n as f64, median, max: sorted[n - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeError {
    /// Relative length change per edge, in `Mesh::edges` order.
    pub per_edge: Vec<f64>,
    pub summary: Summary,
}

/// `| |p'_i - p'_j| - |p_i - p_j| | / |p_i - p_j|` for every edge.
pub fn edge_error(rest: &Mesh, deformed: &[Vec3]) -> Result<EdgeError> {
    if deformed.len() != rest.vertex_count() {
        return Err(Error::IncompatibleConnectivity);
    }
    let p = rest.positions();
    let per_edge = rest
        .edges()
        .par_iter()
        .map(|&[i, j]| {
            let l0 = (p[i] - p[j]).norm();
            if l0 == 0.0 {
                return Err(Error::ZeroLengthRestEdge(i, j));
            }
            Ok(((deformed[i] - deformed[j]).norm() - l0).abs() / l0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let summary = Summary::of(&per_edge);
    Ok(EdgeError { per_edge, summary })
}

/// Edge error between two meshes that must share connectivity.
pub fn edge_error_between(rest: &Mesh, deformed: &Mesh) -> Result<EdgeError> {
    if !check_deformation_compatible(rest, deformed) {
        return Err(Error::IncompatibleConnectivity);
    }
    edge_error(rest, deformed.positions())
}

/// Signed enclosed volume; positive for outward-facing triangles.
pub fn mesh_volume(m: &Mesh, positions: &[Vec3]) -> Result<f64> {
    if !m.is_closed() {
        return Err(Error::OpenMesh);
    }
    if positions.len() != m.vertex_count() {
        return Err(Error::SizeMismatch { expected: m.vertex_count(), found: positions.len() });
    }
    Ok(m.triangles()
        .iter()
        .map(|&[a, b, c]| positions[a].dot(&positions[b].cross(&positions[c])))
        .sum::<f64>()
        / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Distance {
    pub mean: f64,
    pub max: f64,
}

pub fn vertex_distance(a: &[Vec3], b: &[Vec3]) -> Result<Distance> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Ok(Distance::default());
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| (p - q).norm()).collect();
    Ok(Distance { mean: d.iter().sum::<f64>() / d.len() as f64, max: d.iter().copied().fold(0.0, f64::max) })
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub remesh: f64,
    pub correspondence: f64,
    pub coarse_solve: f64,
    pub reconstruct: f64,
    pub refine: f64,
    pub total: f64,
}

impl Timings {
    pub fn stages(&self) -> [(&'static str, f64); 6] {
        [
            ("remesh", self.remesh),
            ("correspondence", self.correspondence),
            ("coarse_solve", self.coarse_solve),
            ("reconstruct", self.reconstruct),
            ("refine", self.refine),
            ("total", self.total),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub mesh: String,
    pub fine_vertices: usize,
    pub coarse_vertices: usize,
    pub edge_error: EdgeError,
    pub volume_rest: Option<f64>,
    pub volume_deformed: Option<f64>,
    pub arap_energy_final: f64,
    pub timings: Timings,
}

impl MetricsReport {
    /// Fills the geometric fields by comparing `deformed` against `rest`.
    pub fn compare(name: &str, rest: &Mesh, deformed: &[Vec3]) -> Result<Self> {
        let edge_error = edge_error(rest, deformed)?;
        let (volume_rest, volume_deformed) = if rest.is_closed() {
            (Some(mesh_volume(rest, rest.positions())?), Some(mesh_volume(rest, deformed)?))
        } else {
            (None, None)
        };
        Ok(Self {
            mesh: name.to_string(),
            fine_vertices: rest.vertex_count(),
            coarse_vertices: rest.vertex_count(),
            edge_error,
            volume_rest,
            volume_deformed,
            ..Default::default()
        })
    }

    pub fn volume_ratio(&self) -> Option<f64> {
        match (self.volume_rest, self.volume_deformed) {
            (Some(r), Some(d)) if r != 0.0 => Some(d / r),
            _ => None,
        }
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.9e}"));
        let _ = writeln!(s, "mesh = {}", self.mesh);
        let _ = writeln!(s, "fine_vertices = {}", self.fine_vertices);
        let _ = writeln!(s, "coarse_vertices = {}", self.coarse_vertices);
        let _ = writeln!(s, "edge_error_mean = {:.9e}", self.edge_error.summary.mean);
        let _ = writeln!(s, "edge_error_median = {:.9e}", self.edge_error.summary.median);
        let _ = writeln!(s, "edge_error_max = {:.9e}", self.edge_error.summary.max);
        let _ = writeln!(s, "volume_rest = {}", opt(self.volume_rest));
        let _ = writeln!(s, "volume_deformed = {}", opt(self.volume_deformed));
        let _ = writeln!(s, "volume_ratio = {}", opt(self.volume_ratio()));
        let _ = writeln!(s, "arap_energy_final = {:.9e}", self.arap_energy_final);
        for (k, v) in self.timings.stages() {
            let _ = writeln!(s, "time_{k} = {v:.6}");
        }
        s
    }

    pub fn csv_header() -> &'static str {
        "mesh,fine_vertices,coarse_vertices,t_remesh,t_correspondence,t_coarse_solve,t_reconstruct,t_refine,t_total,edge_error_mean,edge_error_max,volume_ratio,energy"
    }

    pub fn csv_row(&self) -> String {
        let t = &self.timings;
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.9e},{:.9e},{},{:.9e}",
            self.mesh,
            self.fine_vertices,
            self.coarse_vertices,
            t.remesh,
            t.correspondence,
            t.coarse_solve,
            t.reconstruct,
            t.refine,
            t.total,
            self.edge_error.summary.mean,
            self.edge_error.summary.max,
            self.volume_ratio().map_or_else(String::new, |v| format!("{v:.9e}")),
            self.arap_energy_final
        )
    }
}

/// Black → red → yellow → white for `t` in [0, 1].
pub fn hot_color(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let r = (3.0 * t).min(1.0);
    let g = (3.0 * t - 1.0).clamp(0.0, 1.0);
    let b = (3.0 * t - 2.0).clamp(0.0, 1.0);
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

/// Per-vertex hot colours from per-edge values averaged onto endpoints,
/// scaled linearly to the 95th percentile.
pub fn vertex_colors(m: &Mesh, per_edge: &[f64]) -> Vec<[u8; 3]> {
    let mut sum = vec![0.0; m.vertex_count()];
    let mut count = vec![0usize; m.vertex_count()];
    for (&[i, j], &e) in m.edges().iter().zip(per_edge) {
        for v in [i, j] {
            sum[v] += e;
            count[v] += 1;
        }
    }
    let values: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let mut sorted = values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let p95 = sorted.get(((sorted.len() as f64 - 1.0) * 0.95).round() as usize).copied().unwrap_or(0.0);
    values.iter().map(|&v| hot_color(if p95 > 0.0 { v / p95 } else { 0.0 })).collect()
}
