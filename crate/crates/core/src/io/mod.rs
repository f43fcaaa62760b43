//! Text formats: OBJ meshes, constraint files, index maps, correspondence
//! caches and colour PLY output.

mod cache;
mod constraints;
mod map;
mod obj;
mod ply;

pub use cache::{coarse_hash, parse_corr_cache, read_corr_cache, write_corr_cache, format_corr_cache};
pub use constraints::{format_constraints, parse_constraints, read_constraints, write_constraints};
pub use map::{format_index_map, parse_index_map, read_index_map, write_index_map};
pub use obj::{format_obj, parse_obj, read_mesh, read_obj, write_obj, ObjData};
pub use ply::{format_ply, write_ply};

use crate::error::Error;

pub(crate) fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses a finite float token.
pub(crate) fn float(tok: &str, line: usize) -> Result<f64, Error> {
    match tok.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => Err(parse_err(line, format!("non-finite number '{tok}'"))),
        Err(_) => Err(parse_err(line, format!("expected a number, found '{tok}'"))),
    }
}

/// 17 significant digits, which parse back to the same bits.
pub(crate) fn exact(x: f64) -> String {
    format!("{x:.16e}")
}
