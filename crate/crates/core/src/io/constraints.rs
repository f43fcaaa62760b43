use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{exact, float, parse_err};
use crate::arap::{ConstraintMode, Constraints};
use crate::error::{Error, Result};
use crate::Vec3;

/// Parses `<vertex> <x> <y> <z>` lines with an optional leading
/// `mode hard` or `mode soft [weight]` line. `#` starts a comment.
pub fn parse_constraints(text: &str, vertex_count: usize) -> Result<Constraints> {
    let mut c = Constraints::hard(BTreeMap::new());
    let mut seen_entry = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks[0] == "mode" {
            if seen_entry {
                return Err(parse_err(line, "mode line must precede handles"));
            }
            match toks.get(1..) {
                Some(["hard"]) => c.mode = ConstraintMode::Hard,
                Some(["soft"]) => c.mode = ConstraintMode::Soft,
                Some(["soft", w]) => {
                    let w = float(w, line)?;
                    if w <= 0.0 {
                        return Err(parse_err(line, "soft weight must be positive"));
                    }
                    c.mode = ConstraintMode::Soft;
                    c.soft_weight = Some(w);
                }
                _ => return Err(parse_err(line, "expected 'mode hard' or 'mode soft [weight]'")),
            }
            seen_entry = true;
            continue;
        }
        seen_entry = true;
        if toks.len() != 4 {
            return Err(parse_err(line, format!("expected '<vertex> <x> <y> <z>', found {} fields", toks.len())));
        }
        let v: usize = toks[0].parse().map_err(|_| parse_err(line, format!("bad vertex index '{}'", toks[0])))?;
        if v >= vertex_count {
            return Err(parse_err(line, format!("vertex {v} out of range for {vertex_count} vertices")));
        }
        let p = Vec3::new(float(toks[1], line)?, float(toks[2], line)?, float(toks[3], line)?);
        if c.handles.insert(v, p).is_some() {
            return Err(Error::DuplicateHandle { line, vertex: v });
        }
    }
    Ok(c)
}

pub fn read_constraints(path: impl AsRef<Path>, vertex_count: usize) -> Result<Constraints> {
    parse_constraints(&std::fs::read_to_string(path)?, vertex_count)
}

pub fn format_constraints(c: &Constraints) -> String {
    let mut s = String::new();
    match (c.mode, c.soft_weight) {
        (ConstraintMode::Hard, _) => s.push_str("mode hard\n"),
        (ConstraintMode::Soft, None) => s.push_str("mode soft\n"),
        (ConstraintMode::Soft, Some(w)) => {
            let _ = writeln!(s, "mode soft {}", exact(w));
        }
    }
    for (v, p) in &c.handles {
        let _ = writeln!(s, "{v} {} {} {}", exact(p.x), exact(p.y), exact(p.z));
    }
    s
}

pub fn write_constraints(path: impl AsRef<Path>, c: &Constraints) -> Result<()> {
    std::fs::write(path, format_constraints(c))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut handles = BTreeMap::new();
        handles.insert(3, Vec3::new(0.1, 0.2, 1.0 / 3.0));
        handles.insert(0, Vec3::new(-1e-17, 5.0, 7.25));
        for c in [Constraints::hard(handles.clone()), Constraints::soft(handles.clone(), Some(0.3)), Constraints::soft(handles, None)] {
            let back = parse_constraints(&format_constraints(&c), 10).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        let c = Constraints::hard([(1, Vec3::new(1.0, 2.0, 3.0))].into_iter().collect());
        write_constraints(&path, &c).unwrap();
        assert_eq!(read_constraints(&path, 2).unwrap(), c);
    }

    #[test]
    fn defaults_to_hard_and_skips_comments() {
        let c = parse_constraints("# pins\n\n2 0 0 0\n5 1 1 1 # tip\n", 6).unwrap();
        assert_eq!(c.mode, ConstraintMode::Hard);
        assert_eq!(c.handles.len(), 2);
    }

    #[test]
    fn errors_are_positioned() {
        assert!(matches!(parse_constraints("1 0 0 0\n1 2 2 2\n", 4), Err(Error::DuplicateHandle { line: 2, vertex: 1 })));
        assert!(matches!(parse_constraints("1 0 0\n", 4), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_constraints("mode soft -1\n", 4), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_constraints("mode rigid\n", 4), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_constraints("0 0 0 0\nmode soft\n", 4), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_constraints("\n\n9 0 0 0\n", 4), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_constraints("-1 0 0 0\n", 4), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_constraints("0 0 inf 0\n", 4), Err(Error::Parse { line: 1, .. })));
    }
}
