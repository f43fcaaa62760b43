use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::parse_err;
use crate::error::Result;

/// Parses `<from> <to>` index pairs, one per line. `#` starts a comment.
/// Ids are checked against `from_len` and `to_len`; a repeated `from` is an error.
pub fn parse_index_map(text: &str, from_len: usize, to_len: usize) -> Result<BTreeMap<usize, usize>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 2 {
            return Err(parse_err(line, format!("expected '<from> <to>', found {} fields", toks.len())));
        }
        let id = |t: &str, len: usize| -> Result<usize> {
            let v: usize = t.parse().map_err(|_| parse_err(line, format!("bad index '{t}'")))?;
            if v >= len {
                return Err(parse_err(line, format!("index {v} out of range for {len} vertices")));
            }
            Ok(v)
        };
        let (a, b) = (id(toks[0], from_len)?, id(toks[1], to_len)?);
        if out.insert(a, b).is_some() {
            return Err(parse_err(line, format!("index {a} mapped twice")));
        }
    }
    Ok(out)
}

pub fn read_index_map(path: impl AsRef<Path>, from_len: usize, to_len: usize) -> Result<BTreeMap<usize, usize>> {
    parse_index_map(&std::fs::read_to_string(path)?, from_len, to_len)
}

pub fn format_index_map(map: &BTreeMap<usize, usize>) -> String {
    let mut s = String::new();
    for (a, b) in map {
        let _ = writeln!(s, "{a} {b}");
    }
    s
}

pub fn write_index_map(path: impl AsRef<Path>, map: &BTreeMap<usize, usize>) -> Result<()> {
    std::fs::write(path, format_index_map(map))?;
    Ok(())
}
