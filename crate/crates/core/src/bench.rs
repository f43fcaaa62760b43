//! Full-resolution ARAP against the multi-resolution pipeline on the same
//! handle scenario and iteration budget.

use std::fmt::Write as _;
use std::time::Instant;

use crate::arap::{ArapSystem, Constraints};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::metrics::MetricsReport;
use crate::pipeline::{bend_constraints, PipelineConfig, Session};
use crate::synth::Shape;

/// Fraction of the long axis held at each end.
const HANDLE_BAND: f64 = 0.1;
const BEND_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub shape: String,
    pub ratio: f64,
    pub iterations: usize,
    pub fine_vertices: usize,
    pub coarse_vertices: usize,
    /// Full-resolution solve including factorization.
    pub baseline_seconds: f64,
    /// Decimation, binding, coarse solve, reconstruction and refinement.
    pub pipeline_seconds: f64,
    /// Pipeline time for a prepared session (coarse solve onward).
    pub online_seconds: f64,
    pub report: MetricsReport,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.baseline_seconds / self.pipeline_seconds
    }

    pub fn online_speedup(&self) -> f64 {
        self.baseline_seconds / self.online_seconds
    }
}

fn long_axis(m: &Mesh) -> usize {
    let (lo, hi) = m.bbox();
    (hi - lo).imax()
}

/// Handles for a mesh: bend about its longest bounding-box axis.
pub fn scenario(positions: &[crate::Vec3], axis: usize) -> Constraints {
    bend_constraints(positions, axis, HANDLE_BAND, BEND_ANGLE, false)
}

/// Times both sides on an already built mesh.
pub fn bench_mesh(name: &str, fine: &Mesh, ratio: f64, cfg: &PipelineConfig) -> Result<BenchRow> {
    let axis = long_axis(fine);
    let iterations = cfg.arap_iterations;

    let t = Instant::now();
    let mut full = ArapSystem::new(fine)?;
    full.solve(&scenario(fine.positions(), axis), iterations, None)?;
    let baseline_seconds = t.elapsed().as_secs_f64();

    let cfg = PipelineConfig { target_ratio: ratio, name: name.to_string(), cache_path: None, ..cfg.clone() };
    let t = Instant::now();
    let mut s = Session::prepare(fine.clone(), &cfg)?;
    let prepared = t.elapsed().as_secs_f64();
    let c = scenario(s.coarse().mesh.positions(), axis);
    let t = Instant::now();
    let d = s.deform(&c)?;
    let online_seconds = t.elapsed().as_secs_f64();

    Ok(BenchRow {
        shape: name.to_string(),
        ratio,
        iterations,
        fine_vertices: fine.vertex_count(),
        coarse_vertices: s.coarse().mesh.vertex_count(),
        baseline_seconds,
        pipeline_seconds: prepared + online_seconds,
        online_seconds,
        report: d.report,
    })
}

/// Every shape at every ratio.
pub fn bench(shapes: &[Shape], ratios: &[f64], cfg: &PipelineConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for shape in shapes {
        let fine = shape.build()?;
        for &ratio in ratios {
            rows.push(bench_mesh(&shape.to_string(), &fine, ratio, cfg)?);
        }
    }
    Ok(rows)
}

pub fn csv_header() -> String {
    format!(
        "shape,ratio,iterations,baseline_s,pipeline_s,online_s,speedup,online_speedup,{}",
        MetricsReport::csv_header()
    )
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = csv_header();
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{:.3},{:.3},{}",
            r.shape,
            r.ratio,
            r.iterations,
            r.baseline_seconds,
            r.pipeline_seconds,
            r.online_seconds,
            r.speedup(),
            r.online_speedup(),
            r.report.csv_row()
        );
    }
    s
}
