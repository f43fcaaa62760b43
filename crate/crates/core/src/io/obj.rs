use std::fmt::Write as _;
use std::path::Path;

use super::{exact, float, parse_err};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjData {
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Per-vertex colours, present only if every vertex line carried one.
    pub colors: Option<Vec<[f64; 3]>>,
}

fn face_index(tok: &str, n: usize, line: usize) -> Result<usize> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| parse_err(line, format!("bad face index '{tok}'")))?;
    // Negative indices count back from the most recent vertex.
    let idx = if i > 0 { i - 1 } else if i < 0 { n as i64 + i } else { -1 };
    if idx < 0 {
        return Err(parse_err(line, format!("face index '{tok}' does not name a vertex")));
    }
    Ok(idx as usize)
}

/// Parses `v` and `f` records; polygons are fan-triangulated, everything else is ignored.
pub fn parse_obj(text: &str) -> Result<ObjData> {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut triangles = Vec::new();
    let mut face_lines = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = body.split_whitespace();
        match toks.next() {
            Some("v") => {
                let vals = toks.map(|t| float(t, line)).collect::<Result<Vec<f64>>>()?;
                match vals.len() {
                    3 | 4 => {}
                    6 | 7 => colors.push([vals[3], vals[4], vals[5]]),
                    _ => return Err(parse_err(line, format!("vertex needs 3 coordinates, found {}", vals.len()))),
                }
                positions.push(Vec3::new(vals[0], vals[1], vals[2]));
            }
            Some("f") => {
                let idx = toks.map(|t| face_index(t, positions.len(), line)).collect::<Result<Vec<usize>>>()?;
                if idx.len() < 3 {
                    return Err(Error::NonTriangulatableFace { line });
                }
                for w in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[w], idx[w + 1]]);
                    face_lines.push(line);
                }
            }
            _ => {}
        }
    }
    for (t, &line) in triangles.iter().zip(&face_lines) {
        if let Some(&bad) = t.iter().find(|&&i| i >= positions.len()) {
            return Err(parse_err(line, format!("face index {} exceeds {} vertices", bad + 1, positions.len())));
        }
    }
    let colors = (!colors.is_empty() && colors.len() == positions.len()).then_some(colors);
    Ok(ObjData { positions, triangles, colors })
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<ObjData> {
    parse_obj(&std::fs::read_to_string(path)?)
}

/// Reads an OBJ and validates it as a mesh.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let d = read_obj(path)?;
    Mesh::new(d.positions, d.triangles)
}

pub fn format_obj(positions: &[Vec3], triangles: &[[usize; 3]], colors: Option<&[[f64; 3]]>) -> String {
    let mut s = String::with_capacity(positions.len() * 72 + triangles.len() * 24);
    for (i, p) in positions.iter().enumerate() {
        let _ = write!(s, "v {} {} {}", exact(p.x), exact(p.y), exact(p.z));
        if let Some(c) = colors.and_then(|c| c.get(i)) {
            let _ = write!(s, " {} {} {}", exact(c[0]), exact(c[1]), exact(c[2]));
        }
        s.push('\n');
    }
    for t in triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(
    path: impl AsRef<Path>,
    positions: &[Vec3],
    triangles: &[[usize; 3]],
    colors: Option<&[[f64; 3]]>,
) -> Result<()> {
    std::fs::write(path, format_obj(positions, triangles, colors))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_triangle() {
        let d = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(d.positions.len(), 3);
        assert_eq!(d.triangles, vec![[0, 1, 2]]);
        assert!(d.colors.is_none());
        Mesh::new(d.positions, d.triangles).unwrap();
    }

    #[test]
    fn quad_is_fanned() {
        let d = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(d.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn slashes_negatives_and_noise() {
        let text = "# header\no thing\nv 0 0 0 1 0 0\nv 1 0 0 0 1 0\nvn 0 0 1\nvt 0 0\nv 0 1 0 0 0 1 # trailing\ns off\nf 1/1/1 2//1 -1\n";
        let d = parse_obj(text).unwrap();
        assert_eq!(d.triangles, vec![[0, 1, 2]]);
        assert_eq!(d.colors.unwrap()[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn positioned_errors() {
        assert!(matches!(parse_obj("v 0 0 0\nv 1 0 0\nf 1 2\n"), Err(Error::NonTriangulatableFace { line: 3 })));
        assert!(matches!(parse_obj("v 0 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_obj("v 0 0 0\nv 0 x 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_obj("v 0 0 nan\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_obj("v 0 0 0\nf 1 2 3\nv 1 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_obj("v 0 0 0\nf 0 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_obj("f a b c\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = vec![Vec3::new(0.1, -1.0 / 3.0, 1e-300), Vec3::new(f64::MAX, f64::MIN_POSITIVE, -0.0), Vec3::new(2.0f64.sqrt(), std::f64::consts::PI, 5e-324)];
        let t = vec![[0, 1, 2]];
        let colors = [[0.25, 0.5, 1.0 / 7.0]; 3];
        let d = parse_obj(&format_obj(&p, &t, Some(&colors))).unwrap();
        for (a, b) in d.positions.iter().zip(&p) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
        assert_eq!(d.triangles, t);
        assert_eq!(d.colors.unwrap()[0][2].to_bits(), (1.0f64 / 7.0).to_bits());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        let m = crate::synth::torus(6, 5).unwrap();
        write_obj(&path, m.positions(), m.triangles(), None).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.positions(), m.positions());
        assert_eq!(back.triangles(), m.triangles());
        assert!(matches!(read_obj(dir.path().join("missing.obj")), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let p = vec![Vec3::new(x, -x, x * 0.5)];
            let d = parse_obj(&format_obj(&p, &[], None)).unwrap();
            for k in 0..3 {
                prop_assert_eq!(d.positions[0][k].to_bits(), p[0][k].to_bits());
            }
        }

        #[test]
        fn never_panics(s in "[vf0-9 ./#\\-\n]{0,200}") {
            let _ = parse_obj(&s);
        }
    }
}
