use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cascade_core::arap::DEFAULT_ITERATIONS;
use cascade_core::pipeline::{align_isometric, pose_transfer, Deformation, PipelineConfig, Session};
use cascade_core::remesh::{build_correspondence, decimate, CoarseMesh, DEFAULT_TARGET_RATIO};
use cascade_core::synth::{synthesize, Shape};
use cascade_core::{bench, io, metrics, Error, ErrorKind, Mesh, Result, Vec3};
use clap::{Args, Parser, Subcommand};

/// Multi-resolution as-rigid-as-possible deformation.
#[derive(Parser)]
#[command(name = "cascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decimate a mesh, optionally writing the fine-to-coarse binding cache.
    Remesh {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_RATIO)]
        ratio: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deform a fine mesh through its coarse proxy.
    Deform {
        fine: PathBuf,
        /// Handle file: `<vertex> x y z` lines, optional `mode` header.
        #[arg(long)]
        constraints: PathBuf,
        /// Handle ids refer to fine vertices (mapped to the nearest coarse corner).
        #[arg(long)]
        handles_on_fine: bool,
        #[command(flatten)]
        session: SessionArgs,
        /// Per-vertex edge-error colouring of the result, as PLY.
        #[arg(long)]
        colormap: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align a mesh to target points with soft landmarks.
    Align {
        fine: PathBuf,
        /// Landmark file, same format as constraints.
        #[arg(long)]
        landmarks: PathBuf,
        #[arg(long)]
        landmarks_on_fine: bool,
        /// Target shape with the same connectivity, for the distance summary.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pose a target mesh like a posed source.
    PoseTransfer {
        target: PathBuf,
        #[arg(long)]
        source_rest: PathBuf,
        #[arg(long)]
        source_posed: PathBuf,
        /// `<target vertex> <source vertex>` lines; coarse ids unless `--map-on-fine`.
        #[arg(long)]
        map: PathBuf,
        /// Map ids refer to fine target vertices; entries whose vertex survived
        /// decimation are kept.
        #[arg(long)]
        map_on_fine: bool,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Edge error and volume of a deformed mesh against its rest shape.
    Metrics {
        rest: PathBuf,
        deformed: PathBuf,
        #[arg(long)]
        colormap: Option<PathBuf>,
    },
    /// Write a synthetic test mesh, e.g. `icosphere:4`, `torus:16x8`, `bar:4x4x20:capped`.
    Synth {
        shape: Shape,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random displacement as a fraction of the mean edge length.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time full-resolution ARAP against the pipeline.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "icosphere:5")]
        shapes: Vec<Shape>,
        #[arg(long, value_delimiter = ',', default_value = "0.02")]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Args)]
struct SessionArgs {
    #[arg(long, default_value_t = DEFAULT_TARGET_RATIO, conflicts_with = "coarse")]
    ratio: f64,
    /// Use this coarse mesh instead of decimating.
    #[arg(long)]
    coarse: Option<PathBuf>,
    /// Binding cache: read if present, written otherwise.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long)]
    refine_iters: Option<usize>,
    #[arg(long)]
    refine_weight: Option<f64>,
    /// Do not pin fine vertices near handles during refinement.
    #[arg(long)]
    no_pin: bool,
    #[arg(long)]
    no_refine: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SessionArgs {
    fn open(&self, fine_path: &Path) -> Result<Session> {
        let fine = io::read_mesh(fine_path)?;
        let mut cfg = PipelineConfig {
            target_ratio: self.ratio,
            arap_iterations: self.iterations,
            skip_refine: self.no_refine,
            seed: self.seed,
            cache_path: self.cache.clone(),
            name: fine_path.display().to_string(),
            ..Default::default()
        };
        if let Some(n) = self.refine_iters {
            cfg.refine.iterations = n;
        }
        cfg.refine.fit_weight = self.refine_weight;
        cfg.refine.pin_handles = !self.no_pin;
        match &self.coarse {
            Some(path) => {
                let coarse = CoarseMesh::external(io::read_mesh(path)?, fine.vertex_count());
                Session::with_coarse(fine, coarse, &cfg)
            }
            None => Session::prepare(fine, &cfg),
        }
    }
}

fn write_result(path: &Path, session: &Session, d: &Deformation) -> Result<()> {
    io::write_obj(path, &d.positions, session.fine().triangles(), None)?;
    print!("{}", d.report.to_key_value());
    Ok(())
}

fn write_colormap(path: &Path, rest: &Mesh, positions: &[Vec3]) -> Result<()> {
    let err = metrics::edge_error(rest, positions)?;
    let colors = metrics::vertex_colors(rest, &err.per_edge);
    io::write_ply(path, positions, rest.triangles(), &colors)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Remesh { input, ratio, out, cache, seed } => {
            let fine = io::read_mesh(&input)?;
            let coarse = decimate(&fine, ratio, seed)?;
            io::write_obj(&out, coarse.mesh.positions(), coarse.mesh.triangles(), None)?;
            if let Some(path) = cache {
                let corr = build_correspondence(&fine, &coarse)?;
                io::write_corr_cache(path, &corr, &coarse.mesh)?;
            }
            println!("fine_vertices = {}", fine.vertex_count());
            println!("coarse_vertices = {}", coarse.mesh.vertex_count());
            println!("target_unreachable = {}", coarse.target_unreachable);
        }
        Command::Deform { fine, constraints, handles_on_fine, session, colormap, out } => {
            let mut s = session.open(&fine)?;
            let c = if handles_on_fine {
                s.map_fine_handles(&io::read_constraints(&constraints, s.fine().vertex_count())?)?
            } else {
                io::read_constraints(&constraints, s.coarse().mesh.vertex_count())?
            };
            let d = s.deform(&c)?;
            write_result(&out, &s, &d)?;
            if let Some(path) = colormap {
                write_colormap(&path, s.fine(), &d.positions)?;
            }
        }
        Command::Align { fine, landmarks, landmarks_on_fine, reference, session, out } => {
            let mut s = session.open(&fine)?;
            let c = if landmarks_on_fine {
                s.map_fine_handles(&io::read_constraints(&landmarks, s.fine().vertex_count())?)?
            } else {
                io::read_constraints(&landmarks, s.coarse().mesh.vertex_count())?
            };
            let reference = match reference {
                Some(p) => Some(io::read_mesh(p)?.positions().to_vec()),
                None => None,
            };
            let a = align_isometric(&mut s, &c.handles, reference.as_deref())?;
            io::write_obj(&out, &a.positions, s.fine().triangles(), None)?;
            print!("{}", a.report.to_key_value());
            if let Some(d) = a.distance {
                println!("distance_mean = {:.9e}", d.mean);
                println!("distance_max = {:.9e}", d.max);
            }
        }
        Command::PoseTransfer { target, source_rest, source_posed, map, map_on_fine, session, out } => {
            let mut s = session.open(&target)?;
            let rest = io::read_mesh(source_rest)?;
            let posed = io::read_mesh(source_posed)?;
            let coarse_to_source = if map_on_fine {
                let fine_map = io::read_index_map(&map, s.fine().vertex_count(), rest.vertex_count())?;
                if s.coarse().source_vertex.is_empty() {
                    return Err(Error::InvalidParams("--map-on-fine needs a decimated coarse mesh, not --coarse".into()));
                }
                s.coarse()
                    .source_vertex
                    .iter()
                    .enumerate()
                    .filter_map(|(k, v)| fine_map.get(v).map(|&src| (k, src)))
                    .collect()
            } else {
                io::read_index_map(&map, s.coarse().mesh.vertex_count(), rest.vertex_count())?
            };
            let d = pose_transfer(&mut s, &rest, &posed, &coarse_to_source)?;
            write_result(&out, &s, &d)?;
        }
        Command::Metrics { rest, deformed, colormap } => {
            let rest_mesh = io::read_mesh(&rest)?;
            let deformed = io::read_obj(&deformed)?;
            if deformed.triangles != rest_mesh.triangles() {
                return Err(Error::IncompatibleConnectivity);
            }
            let report = metrics::MetricsReport::compare(&rest.display().to_string(), &rest_mesh, &deformed.positions)?;
            print!("{}", report.to_key_value());
            if let Some(path) = colormap {
                write_colormap(&path, &rest_mesh, &deformed.positions)?;
            }
        }
        Command::Synth { shape, seed, jitter, out } => {
            let m = synthesize(&shape, seed, jitter)?;
            io::write_obj(&out, m.positions(), m.triangles(), None)?;
            println!("vertices = {}", m.vertex_count());
            println!("triangles = {}", m.triangle_count());
        }
        Command::Bench { shapes, ratios, iterations, csv } => {
            let cfg = PipelineConfig { arap_iterations: iterations, ..Default::default() };
            let rows = bench::bench(&shapes, &ratios, &cfg)?;
            let text = bench::to_csv(&rows);
            std::fs::write(&csv, &text)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Topology => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CASCADE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
