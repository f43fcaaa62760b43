//! End-to-end deformation: decimate, bind, deform the coarse mesh, rebuild
//! the fine mesh and optionally refine it. Also the alignment and
//! pose-transfer drivers built on top.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::SymmetricEigen;

use crate::arap::{fit_rotation, ArapSystem, ConstraintMode, Constraints, DEFAULT_ITERATIONS};
use crate::error::{Error, Result};
use crate::io;
use crate::lrf::{bound_points, reconstruct};
use crate::mesh::{check_deformation_compatible, Mesh};
use crate::metrics::{vertex_distance, Distance, MetricsReport, Timings};
use crate::refine::{RefineParams, Refiner};
use crate::remesh::{build_correspondence, decimate_with, CoarseMesh, Correspondence, DecimateOptions, DEFAULT_TARGET_RATIO};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub target_ratio: f64,
    pub arap_iterations: usize,
    pub refine: RefineParams,
    pub skip_refine: bool,
    pub seed: u64,
    /// Correspondence cache: loaded if present, written otherwise.
    pub cache_path: Option<PathBuf>,
    /// Label used in reports.
    pub name: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target_ratio: DEFAULT_TARGET_RATIO,
            arap_iterations: DEFAULT_ITERATIONS,
            refine: RefineParams::default(),
            skip_refine: false,
            seed: 0,
            cache_path: None,
            name: "mesh".into(),
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidParams(format!("target ratio {} outside (0, 1]", self.target_ratio)));
        }
        if let Some(w) = self.refine.fit_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParams(format!("refine weight must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Output of one deformation.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub positions: Vec<Vec3>,
    /// Reconstruction before refinement.
    pub reconstructed: Vec<Vec3>,
    pub coarse_positions: Vec<Vec3>,
    pub report: MetricsReport,
}

/// A fine mesh with its coarse proxy and binding, ready for repeated deformations.
#[derive(Debug)]
pub struct Session {
    fine: Mesh,
    coarse: CoarseMesh,
    corr: Correspondence,
    coarse_system: ArapSystem,
    refiner: Option<Refiner>,
    cfg: PipelineConfig,
    prep: Timings,
}

impl Session {
    /// Decimates `fine` and binds it to the result, using the configured cache.
    pub fn prepare(fine: Mesh, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let t0 = Instant::now();
        let coarse = decimate_with(&fine, &DecimateOptions { target_ratio: cfg.target_ratio, seed: cfg.seed, validate_steps: false })?;
        let remesh = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let corr = load_or_build(&fine, &coarse, cfg)?;
        let correspondence = t1.elapsed().as_secs_f64();
        let mut s = Self::assemble(fine, coarse, corr, cfg)?;
        s.prep.remesh = remesh;
        s.prep.correspondence = correspondence;
        Ok(s)
    }

    /// Uses an existing coarse mesh; the binding is loaded from the cache or rebuilt.
    pub fn with_coarse(fine: Mesh, coarse: CoarseMesh, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let t1 = Instant::now();
        let corr = load_or_build(&fine, &coarse, cfg)?;
        let correspondence = t1.elapsed().as_secs_f64();
        let mut s = Self::assemble(fine, coarse, corr, cfg)?;
        s.prep.correspondence = correspondence;
        Ok(s)
    }

    pub fn from_parts(fine: Mesh, coarse: CoarseMesh, corr: Correspondence, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if corr.len() != fine.vertex_count() {
            return Err(Error::SizeMismatch { expected: fine.vertex_count(), found: corr.len() });
        }
        corr.validate(&coarse.mesh)?;
        Self::assemble(fine, coarse, corr, cfg)
    }

    fn assemble(fine: Mesh, coarse: CoarseMesh, corr: Correspondence, cfg: &PipelineConfig) -> Result<Self> {
        // Decimated proxies carry many obtuse triangles. Negative cotangent
        // weights there make the rest pose a non-stationary point of the
        // energy, so the proxy is solved with them clamped to zero.
        let weights = coarse.mesh.cotangent_weights()?.clamped_non_negative();
        let coarse_system = ArapSystem::with_weights(&coarse.mesh, weights);
        Ok(Self { fine, coarse, corr, coarse_system, refiner: None, cfg: cfg.clone(), prep: Timings::default() })
    }

    pub fn fine(&self) -> &Mesh {
        &self.fine
    }

    pub fn coarse(&self) -> &CoarseMesh {
        &self.coarse
    }

    pub fn correspondence(&self) -> &Correspondence {
        &self.corr
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut PipelineConfig {
        &mut self.cfg
    }

    /// Time spent decimating and binding when the session was built.
    pub fn preparation_timings(&self) -> Timings {
        self.prep
    }

    /// Deforms with handles on coarse vertex ids.
    pub fn deform(&mut self, constraints: &Constraints) -> Result<Deformation> {
        let start = Instant::now();
        let t = Instant::now();
        let sol = self.coarse_system.solve(constraints, self.cfg.arap_iterations, None)?;
        let coarse_solve = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let deformed = self.coarse.mesh.with_positions(sol.positions.clone())?;
        let reconstructed = reconstruct(&self.coarse.mesh, &deformed, &self.corr)?;
        let reconstruct_time = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let positions = if self.cfg.skip_refine || self.cfg.refine.iterations == 0 {
            reconstructed.clone()
        } else {
            let pins = self.pins_for(constraints);
            if self.refiner.is_none() {
                self.refiner = Some(Refiner::new(&self.fine)?);
            }
            let refiner = self.refiner.as_mut().expect("just built");
            refiner.refine(&reconstructed, &self.cfg.refine, &pins)?.positions
        };
        let refine_time = t.elapsed().as_secs_f64();
        let online = start.elapsed().as_secs_f64();

        let mut report = MetricsReport::compare(&self.cfg.name, &self.fine, &positions)?;
        report.coarse_vertices = self.coarse.mesh.vertex_count();
        report.arap_energy_final = sol.final_energy();
        report.timings = Timings {
            remesh: self.prep.remesh,
            correspondence: self.prep.correspondence,
            coarse_solve,
            reconstruct: reconstruct_time,
            refine: refine_time,
            total: self.prep.remesh + self.prep.correspondence + online,
        };
        Ok(Deformation { positions, reconstructed, coarse_positions: sol.positions, report })
    }

    /// Fine vertices bound to a triangle touching a coarse handle.
    fn pins_for(&self, c: &Constraints) -> Vec<usize> {
        let handles: BTreeSet<usize> = c.handles.keys().chain(c.pins.keys()).copied().collect();
        let tris = self.coarse.mesh.triangles();
        self.corr
            .bindings
            .iter()
            .enumerate()
            .filter(|(_, b)| tris[b.triangle].iter().any(|v| handles.contains(v)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Moves handles given on fine vertex ids to the nearest corner of each
    /// one's bound coarse triangle. Several fine handles landing on one coarse
    /// vertex are averaged. Lossy by nature.
    pub fn map_fine_handles(&self, c: &Constraints) -> Result<Constraints> {
        let n = self.fine.vertex_count();
        let cp = self.coarse.mesh.positions();
        let mut acc: BTreeMap<usize, (Vec3, usize)> = BTreeMap::new();
        let map = |src: &BTreeMap<usize, Vec3>, acc: &mut BTreeMap<usize, (Vec3, usize)>| -> Result<()> {
            for (&v, &target) in src {
                if v >= n {
                    return Err(Error::IndexOutOfRange { index: v, len: n });
                }
                let p = self.fine.positions()[v];
                let tri = self.coarse.mesh.triangles()[self.corr.bindings[v].triangle];
                let nearest = tri
                    .into_iter()
                    .min_by(|&a, &b| (cp[a] - p).norm_squared().total_cmp(&(cp[b] - p).norm_squared()).then(a.cmp(&b)))
                    .expect("three corners");
                let e = acc.entry(nearest).or_insert((Vec3::zeros(), 0));
                e.0 += target;
                e.1 += 1;
            }
            Ok(())
        };
        map(&c.handles, &mut acc)?;
        let handles = acc.into_iter().map(|(k, (s, m))| (k, s / m as f64)).collect();
        let mut pins = BTreeMap::new();
        map(&c.pins, &mut pins)?;
        Ok(Constraints {
            handles,
            mode: c.mode,
            soft_weight: c.soft_weight,
            pins: pins.into_iter().map(|(k, (s, m))| (k, s / m as f64)).collect(),
        })
    }
}

fn load_or_build(fine: &Mesh, coarse: &CoarseMesh, cfg: &PipelineConfig) -> Result<Correspondence> {
    match &cfg.cache_path {
        Some(path) if path.exists() => io::read_corr_cache(path, fine, &coarse.mesh),
        Some(path) => {
            let corr = build_correspondence(fine, coarse)?;
            io::write_corr_cache(path, &corr, &coarse.mesh)?;
            // Reload so cold and warm runs see the same decimal round-trip.
            io::read_corr_cache(path, fine, &coarse.mesh)
        }
        None => build_correspondence(fine, coarse),
    }
}

/// Decimate, bind, deform and rebuild in one call. Handles are coarse vertex ids.
pub fn run_pipeline(fine: &Mesh, coarse_constraints: &Constraints, cfg: &PipelineConfig) -> Result<(Vec<Vec3>, MetricsReport)> {
    let mut s = Session::prepare(fine.clone(), cfg)?;
    let d = s.deform(coarse_constraints)?;
    Ok((d.positions, d.report))
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub positions: Vec<Vec3>,
    pub coarse_positions: Vec<Vec3>,
    /// Distance to the reference positions, when given.
    pub distance: Option<Distance>,
    pub report: MetricsReport,
}

fn check_landmarks(points: &[Vec3], scale: f64) -> Result<()> {
    if points.len() < 4 {
        return Err(Error::InsufficientLandmarks(points.len()));
    }
    let c = points.iter().sum::<Vec3>() / points.len() as f64;
    let cov: Mat3 = points.iter().map(|p| (p - c) * (p - c).transpose()).sum::<Mat3>() / points.len() as f64;
    let smallest = SymmetricEigen::new(cov).eigenvalues.min();
    if smallest <= (1e-6 * scale).powi(2) {
        return Err(Error::InsufficientLandmarks(points.len()));
    }
    Ok(())
}

/// Soft-constrains coarse landmarks of the session's mesh to target points and
/// rebuilds the fine mesh. `reference` (fine positions of the target shape,
/// same connectivity) enables the distance summary.
pub fn align_isometric(session: &mut Session, landmarks: &BTreeMap<usize, Vec3>, reference: Option<&[Vec3]>) -> Result<Alignment> {
    let cm = &session.coarse().mesh;
    let n = cm.vertex_count();
    if let Some(&bad) = landmarks.keys().find(|&&k| k >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let targets: Vec<Vec3> = landmarks.values().copied().collect();
    check_landmarks(&targets, cm.bbox_diagonal())?;
    let c = Constraints::soft(landmarks.clone(), None);
    let d = session.deform(&c)?;
    let distance = match reference {
        Some(r) => Some(vertex_distance(&d.positions, r)?),
        None => None,
    };
    Ok(Alignment { positions: d.positions, coarse_positions: d.coarse_positions, distance, report: d.report })
}

/// Points of the rest mesh carried onto an aligned coarse mesh: each fine
/// vertex's barycentric binding evaluated on `aligned_coarse`.
pub fn sub_vertex_points(session: &Session, aligned_coarse: &[Vec3]) -> Result<Vec<Vec3>> {
    let m = session.coarse().mesh.with_positions(aligned_coarse.to_vec())?;
    Ok(bound_points(&m, session.correspondence()))
}

/// Handle targets on the session's coarse mesh reproducing the motion of a
/// source pair, mapped sparsely from coarse vertex to source vertex.
///
/// The source's best-fit rigid motion is applied to the coarse vertices as is.
/// What remains is added as a displacement, rotated by the rigid offset
/// between the source and the coarse mesh.
pub fn pose_transfer_targets(
    coarse: &Mesh,
    source_rest: &Mesh,
    source_posed: &Mesh,
    coarse_to_source: &BTreeMap<usize, usize>,
) -> Result<BTreeMap<usize, Vec3>> {
    if !check_deformation_compatible(source_rest, source_posed) {
        return Err(Error::IncompatibleSourcePair);
    }
    let required = (coarse.vertex_count() as f64 * 0.1).ceil() as usize;
    if coarse_to_source.len() < required.max(1) {
        return Err(Error::SparseMapTooSmall { mapped: coarse_to_source.len(), required: required.max(1) });
    }
    for (&k, &s) in coarse_to_source {
        if k >= coarse.vertex_count() {
            return Err(Error::IndexOutOfRange { index: k, len: coarse.vertex_count() });
        }
        if s >= source_rest.vertex_count() {
            return Err(Error::IndexOutOfRange { index: s, len: source_rest.vertex_count() });
        }
    }
    let pairs: Vec<(Vec3, Vec3, Vec3)> = coarse_to_source
        .iter()
        .map(|(&k, &s)| (coarse.positions()[k], source_rest.positions()[s], source_posed.positions()[s]))
        .collect();
    let m = pairs.len() as f64;
    let c_bar = pairs.iter().map(|p| p.0).sum::<Vec3>() / m;
    let s_bar = pairs.iter().map(|p| p.1).sum::<Vec3>() / m;
    let p_bar = pairs.iter().map(|p| p.2).sum::<Vec3>() / m;
    let src: Vec<Vec3> = pairs.iter().map(|p| p.1 - s_bar).collect();
    let ones = vec![1.0; pairs.len()];
    let align = fit_rotation(&src, &pairs.iter().map(|p| p.0 - c_bar).collect::<Vec<_>>(), &ones);
    let motion = fit_rotation(&src, &pairs.iter().map(|p| p.2 - p_bar).collect::<Vec<_>>(), &ones);
    let carried = motion * align * motion.transpose();
    Ok(coarse_to_source
        .keys()
        .zip(&pairs)
        .map(|(&k, (c, r, p))| {
            let residual = (p - p_bar) - motion * (r - s_bar);
            (k, p_bar + motion * (c - s_bar) + carried * residual)
        })
        .collect())
}

/// Poses the session's mesh like `source_posed` relative to `source_rest`.
pub fn pose_transfer(
    session: &mut Session,
    source_rest: &Mesh,
    source_posed: &Mesh,
    coarse_to_source: &BTreeMap<usize, usize>,
) -> Result<Deformation> {
    let targets = pose_transfer_targets(&session.coarse().mesh, source_rest, source_posed, coarse_to_source)?;
    session.deform(&Constraints::soft(targets, None))
}

/// Hard handles pinning every coarse vertex where it is.
pub fn identity_constraints(coarse: &Mesh) -> Constraints {
    Constraints::hard(coarse.positions().iter().copied().enumerate().collect())
}

/// Handles for the bar-bend style scenario: vertices in the lowest `band`
/// fraction along `axis` stay put, those in the highest are rotated by
/// `angle` about an axis through the top centre, perpendicular to `axis`.
pub fn bend_constraints(positions: &[Vec3], axis: usize, band: f64, angle: f64, twist: bool) -> Constraints {
    let lo = positions.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
    let hi = positions.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
    let len = hi - lo;
    let top: Vec<Vec3> = positions.iter().filter(|p| p[axis] >= hi - band * len).copied().collect();
    let centre = top.iter().sum::<Vec3>() / top.len().max(1) as f64;
    let mut dir = Vec3::zeros();
    dir[axis] = 1.0;
    let hinge = if twist { dir } else { dir.cross(&Vec3::new(dir.y, dir.z, dir.x)) };
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(hinge), angle);
    let mut handles = BTreeMap::new();
    for (i, p) in positions.iter().enumerate() {
        if p[axis] <= lo + band * len {
            handles.insert(i, *p);
        } else if p[axis] >= hi - band * len {
            handles.insert(i, rot * (p - centre) + centre);
        }
    }
    Constraints { handles, mode: ConstraintMode::Hard, soft_weight: None, pins: BTreeMap::new() }
}
