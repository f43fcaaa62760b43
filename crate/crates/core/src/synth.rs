//! Deterministic test shapes.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::Vec3;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

/// Unit sphere from an icosahedron with every face split into `f²` triangles.
/// Vertex count is `10 f² + 2`.
pub fn geosphere(f: usize) -> Result<Mesh> {
    if f == 0 {
        return Err(invalid("geosphere frequency must be at least 1"));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let corners = [
        Vec3::new(-1.0, t, 0.0),
        Vec3::new(1.0, t, 0.0),
        Vec3::new(-1.0, -t, 0.0),
        Vec3::new(1.0, -t, 0.0),
        Vec3::new(0.0, -1.0, t),
        Vec3::new(0.0, 1.0, t),
        Vec3::new(0.0, -1.0, -t),
        Vec3::new(0.0, 1.0, -t),
        Vec3::new(t, 0.0, -1.0),
        Vec3::new(t, 0.0, 1.0),
        Vec3::new(-t, 0.0, -1.0),
        Vec3::new(-t, 0.0, 1.0),
    ];
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    // A lattice point is identified by its nonzero integer weights on the
    // icosahedron corners, so points on shared edges are created once.
    let mut ids: HashMap<[(usize, usize); 3], usize> = HashMap::new();
    let mut pos = Vec::with_capacity(10 * f * f + 2);
    let mut tris = Vec::with_capacity(20 * f * f);
    let mut lattice = vec![0usize; (f + 1) * (f + 2) / 2];
    let row = |i: usize| i * (2 * f + 3 - i) / 2;
    for face in &faces {
        for i in 0..=f {
            for j in 0..=f - i {
                let w = [(face[0], f - i - j), (face[1], i), (face[2], j)];
                let mut key = [(usize::MAX, 0); 3];
                let mut k = 0;
                let mut sorted = w;
                sorted.sort_unstable();
                for (c, wt) in sorted {
                    if wt > 0 {
                        key[k] = (c, wt);
                        k += 1;
                    }
                }
                let id = *ids.entry(key).or_insert_with(|| {
                    let p = w.iter().fold(Vec3::zeros(), |acc, &(c, wt)| acc + corners[c] * wt as f64);
                    pos.push(p.normalize());
                    pos.len() - 1
                });
                lattice[row(i) + j] = id;
            }
        }
        for i in 0..f {
            for j in 0..f - i {
                let a = lattice[row(i) + j];
                let b = lattice[row(i + 1) + j];
                let c = lattice[row(i) + j + 1];
                tris.push([a, b, c]);
                if j + 1 < f - i {
                    let d = lattice[row(i + 1) + j + 1];
                    tris.push([b, d, c]);
                }
            }
        }
    }
    Mesh::new(pos, tris)
}

/// Geodesic sphere with the vertex count of `n` rounds of 1-to-4 subdivision
/// (`10·4ⁿ + 2`).
pub fn icosphere(n: u32) -> Result<Mesh> {
    if n > 12 {
        return Err(invalid("icosphere subdivision level above 12"));
    }
    geosphere(1 << n)
}

/// Torus with `m` segments around the main axis and `n` around the tube.
pub fn torus(m: usize, n: usize) -> Result<Mesh> {
    if m < 3 || n < 3 {
        return Err(invalid("torus needs at least 3 segments each way"));
    }
    let (big, small) = (1.0, 0.4);
    let mut pos = Vec::with_capacity(m * n);
    for i in 0..m {
        let a = i as f64 / m as f64 * TAU;
        for j in 0..n {
            let b = j as f64 / n as f64 * TAU;
            let r = big + small * b.cos();
            pos.push(Vec3::new(r * a.cos(), r * a.sin(), small * b.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % m) * n + j % n;
    let mut tris = Vec::with_capacity(2 * m * n);
    for i in 0..m {
        for j in 0..n {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(pos, tris)
}

/// Surface of a box made of `nx × ny × nz` cells spanning `size`, axis along z.
/// Open ends leave two boundary loops; capped is closed.
pub fn box_shell(nx: usize, ny: usize, nz: usize, size: Vec3, capped: bool) -> Result<Mesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(invalid("box needs at least one cell per axis"));
    }
    if !size.iter().all(|s| s.is_finite() && *s > 0.0) {
        return Err(invalid("box size must be positive"));
    }
    let step = Vec3::new(size.x / nx as f64, size.y / ny as f64, size.z / nz as f64);
    // Perimeter, counter-clockwise seen from +z.
    let mut ring: Vec<(usize, usize)> = Vec::new();
    ring.extend((0..nx).map(|i| (i, 0)));
    ring.extend((0..ny).map(|j| (nx, j)));
    ring.extend((0..nx).map(|i| (nx - i, ny)));
    ring.extend((0..ny).map(|j| (0, ny - j)));
    let r = ring.len();
    let mut pos = Vec::new();
    for k in 0..=nz {
        for &(i, j) in &ring {
            pos.push(Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z));
        }
    }
    let mut tris = Vec::new();
    for k in 0..nz {
        for i in 0..r {
            let a = k * r + i;
            let b = k * r + (i + 1) % r;
            let c = b + r;
            let d = a + r;
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    if capped {
        for (k, top) in [(0, false), (nz, true)] {
            let mut grid = vec![usize::MAX; (nx + 1) * (ny + 1)];
            for (idx, &(i, j)) in ring.iter().enumerate() {
                grid[j * (nx + 1) + i] = k * r + idx;
            }
            for j in 1..ny {
                for i in 1..nx {
                    grid[j * (nx + 1) + i] = pos.len();
                    pos.push(Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z));
                }
            }
            let g = |i: usize, j: usize| grid[j * (nx + 1) + i];
            for j in 0..ny {
                for i in 0..nx {
                    let (p00, p10, p11, p01) = (g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1));
                    if top {
                        tris.push([p00, p10, p11]);
                        tris.push([p00, p11, p01]);
                    } else {
                        tris.push([p00, p11, p10]);
                        tris.push([p00, p01, p11]);
                    }
                }
            }
        }
    }
    Mesh::new(pos, tris)
}

/// Box-section bar of `w × h × l` unit cells, long axis z.
pub fn bar(w: usize, h: usize, l: usize, capped: bool) -> Result<Mesh> {
    box_shell(w, h, l, Vec3::new(w as f64, h as f64, l as f64), capped)
}

/// Closed unit-square slab of thickness `gap`: two opposite-facing sheets
/// joined along a thin rim.
pub fn slab(nx: usize, ny: usize, gap: f64) -> Result<Mesh> {
    box_shell(nx, ny, 1, Vec3::new(1.0, 1.0, gap), true)
}

/// Unit disk in the xy-plane with `rings` concentric rings (ring k has 6k vertices).
pub fn disk(rings: usize) -> Result<Mesh> {
    if rings == 0 {
        return Err(invalid("disk needs at least one ring"));
    }
    let mut pos = vec![Vec3::zeros()];
    let mut start = vec![0usize];
    for k in 1..=rings {
        start.push(pos.len());
        let n = 6 * k;
        let r = k as f64 / rings as f64;
        for i in 0..n {
            let a = i as f64 / n as f64 * TAU;
            pos.push(Vec3::new(r * a.cos(), r * a.sin(), 0.0));
        }
    }
    let mut tris = Vec::new();
    for k in 1..=rings {
        let (a, b) = (6 * (k - 1), 6 * k);
        let inner = |i: usize| start[k - 1] + i % a;
        let outer = |j: usize| start[k] + j % b;
        if k == 1 {
            tris.extend((0..b).map(|j| [0, outer(j), outer(j + 1)]));
            continue;
        }
        let (mut i, mut j) = (0, 0);
        while i < a || j < b {
            // Advance along whichever ring has the nearer next angle.
            let ti = (i + 1) as f64 / a as f64;
            let tj = (j + 1) as f64 / b as f64;
            if j < b && (i == a || tj <= ti) {
                tris.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            } else {
                tris.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            }
        }
    }
    Mesh::new(pos, tris)
}

/// Open unit-radius tube along z with `segments` around and `rings` rings.
pub fn cylinder(segments: usize, rings: usize, height: f64) -> Result<Mesh> {
    if segments < 3 || rings < 2 {
        return Err(invalid("cylinder needs 3 segments and 2 rings"));
    }
    if !(height.is_finite() && height > 0.0) {
        return Err(invalid("cylinder height must be positive"));
    }
    let mut pos = Vec::new();
    for r in 0..rings {
        let z = height * r as f64 / (rings - 1) as f64;
        for i in 0..segments {
            let a = i as f64 / segments as f64 * TAU;
            pos.push(Vec3::new(a.cos(), a.sin(), z));
        }
    }
    let id = |r: usize, i: usize| r * segments + i % segments;
    let mut tris = Vec::new();
    for r in 0..rings - 1 {
        for i in 0..segments {
            tris.push([id(r, i), id(r, i + 1), id(r + 1, i + 1)]);
            tris.push([id(r, i), id(r + 1, i + 1), id(r + 1, i)]);
        }
    }
    Mesh::new(pos, tris)
}

/// A shape recipe, parsed from strings like `icosphere:4`, `torus:16x16`,
/// `bar:4x4x20`, `bar:4x4x20:capped`, `slab:20:0.01`, `disk:10`,
/// `cylinder:32x20x4` or `geosphere:212`.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Icosphere(u32),
    Geosphere(usize),
    Torus(usize, usize),
    Bar { w: usize, h: usize, l: usize, capped: bool },
    Slab { n: usize, gap: f64 },
    Disk(usize),
    Cylinder { segments: usize, rings: usize, height: f64 },
}

impl Shape {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            Shape::Icosphere(n) => icosphere(n),
            Shape::Geosphere(f) => geosphere(f),
            Shape::Torus(m, n) => torus(m, n),
            Shape::Bar { w, h, l, capped } => bar(w, h, l, capped),
            Shape::Slab { n, gap } => slab(n, n, gap),
            Shape::Disk(r) => disk(r),
            Shape::Cylinder { segments, rings, height } => cylinder(segments, rings, height),
        }
    }
}

/// Builds `shape`. All shapes are deterministic; `seed` only picks a
/// reproducible sub-cell jitter when `jitter > 0` (fraction of mean edge length).
pub fn synthesize(shape: &Shape, seed: u64, jitter: f64) -> Result<Mesh> {
    let m = shape.build()?;
    if jitter <= 0.0 {
        return Ok(m);
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = jitter * m.mean_edge_length();
    let pos = m
        .positions()
        .iter()
        .map(|p| p + Vec3::new(rng.random_range(-h..=h), rng.random_range(-h..=h), rng.random_range(-h..=h)))
        .collect();
    m.with_positions(pos)
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Icosphere(n) => write!(f, "icosphere:{n}"),
            Shape::Geosphere(n) => write!(f, "geosphere:{n}"),
            Shape::Torus(m, n) => write!(f, "torus:{m}x{n}"),
            Shape::Bar { w, h, l, capped } => {
                write!(f, "bar:{w}x{h}x{l}")?;
                if *capped {
                    write!(f, ":capped")?;
                }
                Ok(())
            }
            Shape::Slab { n, gap } => write!(f, "slab:{n}:{gap}"),
            Shape::Disk(r) => write!(f, "disk:{r}"),
            Shape::Cylinder { segments, rings, height } => write!(f, "cylinder:{segments}x{rings}x{height}"),
        }
    }
}

fn dims<T: FromStr>(s: &str, n: usize) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split('x')
        .map(|p| p.trim().parse::<T>().map_err(|_| invalid(format!("bad number '{p}'"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(invalid(format!("expected {n} dimensions in '{s}'")));
    }
    Ok(v)
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let arg = |i: usize| parts.get(i).copied().ok_or_else(|| invalid(format!("missing parameter in '{s}'")));
        Ok(match parts[0] {
            "icosphere" => Shape::Icosphere(dims(arg(1)?, 1)?[0]),
            "geosphere" => Shape::Geosphere(dims(arg(1)?, 1)?[0]),
            "torus" => {
                let d = dims(arg(1)?, 2)?;
                Shape::Torus(d[0], d[1])
            }
            "bar" => {
                let d = dims(arg(1)?, 3)?;
                let capped = match parts.get(2) {
                    None | Some(&"open") => false,
                    Some(&"capped") => true,
                    Some(other) => return Err(invalid(format!("bar end '{other}' is neither open nor capped"))),
                };
                Shape::Bar { w: d[0], h: d[1], l: d[2], capped }
            }
            "slab" => {
                let n = dims(arg(1)?, 1)?[0];
                let gap = match parts.get(2) {
                    Some(g) => dims::<f64>(g, 1)?[0],
                    None => 0.01 / n as f64,
                };
                Shape::Slab { n, gap }
            }
            "disk" => Shape::Disk(dims(arg(1)?, 1)?[0]),
            "cylinder" => {
                let d: Vec<f64> = dims(arg(1)?, 3)?;
                if d[0].fract() != 0.0 || d[1].fract() != 0.0 || d[0] < 0.0 || d[1] < 0.0 {
                    return Err(invalid("cylinder segments and rings must be integers"));
                }
                Shape::Cylinder { segments: d[0] as usize, rings: d[1] as usize, height: d[2] }
            }
            other => return Err(invalid(format!("unknown shape '{other}'"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for n in 0..5 {
            let m = icosphere(n).unwrap();
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(n) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.is_closed());
        }
        assert_eq!(icosphere(3).unwrap().vertex_count(), 642);
    }

    #[test]
    fn icosphere_faces_outward() {
        let m = icosphere(2).unwrap();
        for t in 0..m.triangle_count() {
            let [a, b, c] = m.triangle_points(t);
            assert!(m.triangle_cross(t).dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn torus_is_genus_one() {
        let m = torus(8, 8).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.is_closed());
    }

    #[test]
    fn bar_open_and_capped() {
        let open = bar(4, 4, 20, false).unwrap();
        assert_eq!(open.boundary_loop_count(), 2);
        assert_eq!(open.euler_characteristic(), 0);
        let capped = bar(4, 4, 20, true).unwrap();
        assert!(capped.is_closed());
        assert_eq!(capped.euler_characteristic(), 2);
        // Outward: the signed volume is positive and equals the box volume.
        let vol: f64 = (0..capped.triangle_count())
            .map(|t| {
                let [a, b, c] = capped.triangle_points(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        assert!((vol - 320.0).abs() < 1e-9);
    }

    #[test]
    fn disk_and_cylinder() {
        let d = disk(5).unwrap();
        assert_eq!(d.vertex_count(), 1 + 3 * 5 * 6);
        assert_eq!(d.euler_characteristic(), 1);
        assert_eq!(d.boundary_loop_count(), 1);
        for t in 0..d.triangle_count() {
            assert!(d.triangle_cross(t).z > 0.0);
        }
        let c = cylinder(16, 5, 2.0).unwrap();
        assert_eq!(c.euler_characteristic(), 0);
        assert_eq!(c.boundary_loop_count(), 2);
    }

    #[test]
    fn slab_is_thin_and_closed() {
        let s = slab(6, 6, 0.001).unwrap();
        assert!(s.is_closed());
        let (lo, hi) = s.bbox();
        assert!((hi.z - lo.z - 0.001).abs() < 1e-15);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["icosphere:4", "geosphere:212", "torus:16x8", "bar:4x4x20", "bar:4x4x20:capped", "slab:20:0.5", "disk:10", "cylinder:32x20x4"] {
            let shape: Shape = s.parse().unwrap();
            assert_eq!(shape.to_string(), s);
        }
        assert!("cube:3".parse::<Shape>().is_err());
        assert!("torus:3".parse::<Shape>().is_err());
        assert!("bar:4x4x20:closed".parse::<Shape>().is_err());
    }

    #[test]
    fn bad_params() {
        assert!(matches!(torus(2, 8), Err(Error::InvalidParams(_))));
        assert!(matches!(disk(0), Err(Error::InvalidParams(_))));
        assert!(matches!(geosphere(0), Err(Error::InvalidParams(_))));
    }
}
