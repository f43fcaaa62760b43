use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::Vec3;

/// ASCII PLY with per-vertex `uchar` RGB.
pub fn format_ply(positions: &[Vec3], triangles: &[[usize; 3]], colors: &[[u8; 3]]) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", positions.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    let _ = writeln!(s, "element face {}", triangles.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, p) in positions.iter().enumerate() {
        let c = colors.get(i).copied().unwrap_or([0, 0, 0]);
        let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
    }
    for t in triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_ply(path: impl AsRef<Path>, positions: &[Vec3], triangles: &[[usize; 3]], colors: &[[u8; 3]]) -> Result<()> {
    std::fs::write(path, format_ply(positions, triangles, colors))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_body() {
        let p = [Vec3::new(0.5, 0.0, 0.0), Vec3::x(), Vec3::y()];
        let s = format_ply(&p, &[[0, 1, 2]], &[[255, 0, 0], [0, 255, 0], [0, 0, 255]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "ply");
        assert!(lines.contains(&"element vertex 3"));
        assert!(lines.contains(&"element face 1"));
        let body = &lines[lines.iter().position(|l| *l == "end_header").unwrap() + 1..];
        assert_eq!(body, ["0.5 0 0 255 0 0", "1 0 0 0 255 0", "0 1 0 0 0 255", "3 0 1 2"]);
    }
}
