use std::fmt::Write as _;
use std::path::Path;

use super::{exact, float, parse_err};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::remesh::{Binding, Correspondence};
use crate::Vec3;

const MAGIC: &str = "CORR";
const VERSION: &str = "v1";

/// 64-bit FNV-1a over the coarse positions (f64, little endian) followed by
/// the triangle ids (u64, little endian).
pub fn coarse_hash(coarse: &Mesh) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: [u8; 8]| {
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    for p in coarse.positions() {
        for k in 0..3 {
            feed(p[k].to_le_bytes());
        }
    }
    for t in coarse.triangles() {
        for &v in t {
            feed((v as u64).to_le_bytes());
        }
    }
    h
}

pub fn format_corr_cache(corr: &Correspondence, coarse: &Mesh) -> String {
    let mut s = String::with_capacity(32 + corr.len() * 150);
    let _ = writeln!(s, "{MAGIC} {VERSION} {} {:016x}", corr.len(), coarse_hash(coarse));
    for b in &corr.bindings {
        let [b0, b1, b2] = b.barycentric;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {}",
            b.triangle,
            exact(b0),
            exact(b1),
            exact(b2),
            exact(b.offset.x),
            exact(b.offset.y),
            exact(b.offset.z)
        );
    }
    s
}

pub fn write_corr_cache(path: impl AsRef<Path>, corr: &Correspondence, coarse: &Mesh) -> Result<()> {
    std::fs::write(path, format_corr_cache(corr, coarse))?;
    Ok(())
}

/// Parses a cache and checks it belongs to `fine` and `coarse`.
pub fn parse_corr_cache(text: &str, fine: &Mesh, coarse: &Mesh) -> Result<Correspondence> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split_whitespace().collect(),
        None => return Err(parse_err(1, "empty correspondence cache")),
    };
    if header.len() != 4 || header[0] != MAGIC {
        return Err(parse_err(1, "expected 'CORR v1 <n_fine> <coarse_hash>'"));
    }
    if header[1] != VERSION {
        return Err(parse_err(1, format!("unsupported cache version '{}'", header[1])));
    }
    let n: usize = header[2].parse().map_err(|_| parse_err(1, format!("bad vertex count '{}'", header[2])))?;
    let hash = u64::from_str_radix(header[3], 16).map_err(|_| parse_err(1, format!("bad hash '{}'", header[3])))?;
    if n != fine.vertex_count() {
        return Err(Error::CacheMismatch(format!("cache has {n} fine vertices, mesh has {}", fine.vertex_count())));
    }
    if hash != coarse_hash(coarse) {
        return Err(Error::CacheMismatch("coarse mesh hash differs".into()));
    }
    let mut bindings = Vec::with_capacity(n);
    for (k, raw) in lines {
        let line = k + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 7 {
            return Err(parse_err(line, format!("expected 7 fields, found {}", toks.len())));
        }
        let triangle: usize = toks[0].parse().map_err(|_| parse_err(line, format!("bad triangle id '{}'", toks[0])))?;
        if triangle >= coarse.triangle_count() {
            return Err(parse_err(line, format!("triangle {triangle} out of range")));
        }
        let f = |i: usize| float(toks[i], line);
        bindings.push(Binding {
            triangle,
            barycentric: [f(1)?, f(2)?, f(3)?],
            offset: Vec3::new(f(4)?, f(5)?, f(6)?),
            fallback: false,
        });
    }
    if bindings.len() != n {
        return Err(parse_err(text.lines().count(), format!("expected {n} bindings, found {}", bindings.len())));
    }
    let corr = Correspondence { bindings };
    corr.validate(coarse)?;
    Ok(corr)
}

pub fn read_corr_cache(path: impl AsRef<Path>, fine: &Mesh, coarse: &Mesh) -> Result<Correspondence> {
    parse_corr_cache(&std::fs::read_to_string(path)?, fine, coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_corr(rng: &mut ChaCha8Rng, n: usize, tris: usize) -> Correspondence {
        let bindings = (0..n)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random::<f64>() * (1.0 - a);
                Binding {
                    triangle: rng.random_range(0..tris),
                    barycentric: [a, b, 1.0 - a - b],
                    offset: Vec3::new(rng.random_range(-1.0..1.0), rng.random::<f64>() * 1e-9, rng.random_range(-1e5..1e5)),
                    fallback: false,
                }
            })
            .collect();
        Correspondence { bindings }
    }

    #[test]
    fn fuzz_round_trip() {
        let fine = synth::icosphere(2).unwrap();
        let coarse = synth::icosphere(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let corr = random_corr(&mut rng, fine.vertex_count(), coarse.triangle_count());
            let back = parse_corr_cache(&format_corr_cache(&corr, &coarse), &fine, &coarse).unwrap();
            for (a, b) in back.bindings.iter().zip(&corr.bindings) {
                assert_eq!(a.triangle, b.triangle);
                for k in 0..3 {
                    assert_eq!(a.barycentric[k].to_bits(), b.barycentric[k].to_bits());
                    assert_eq!(a.offset[k].to_bits(), b.offset[k].to_bits());
                }
            }
        }
    }

    #[test]
    fn other_coarse_is_rejected() {
        let fine = synth::icosphere(2).unwrap();
        let a = synth::icosphere(1).unwrap();
        let mut p = a.positions().to_vec();
        p[0].x += 1e-12;
        let b = a.with_positions(p).unwrap();
        let corr = random_corr(&mut ChaCha8Rng::seed_from_u64(3), fine.vertex_count(), a.triangle_count());
        let text = format_corr_cache(&corr, &a);
        assert!(matches!(parse_corr_cache(&text, &fine, &b), Err(Error::CacheMismatch(_))));
        assert!(matches!(parse_corr_cache(&text, &a, &a), Err(Error::CacheMismatch(_))));
    }

    #[test]
    fn hash_is_fnv1a() {
        // One triangle, all coordinates zero: the hash of 9 zero f64 + ids 0, 1, 2.
        let m = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let mut bytes = Vec::new();
        for p in m.positions() {
            for k in 0..3 {
                bytes.extend_from_slice(&p[k].to_le_bytes());
            }
        }
        for v in [0u64, 1, 2] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut h: u64 = 14695981039346656037;
        for b in bytes {
            h = (h ^ b as u64).wrapping_mul(1099511628211);
        }
        assert_eq!(coarse_hash(&m), h);
    }

    #[test]
    fn malformed() {
        let fine = synth::icosphere(0).unwrap();
        let coarse = fine.clone();
        let head = format!("CORR v1 12 {:016x}\n", coarse_hash(&coarse));
        assert!(matches!(parse_corr_cache("", &fine, &coarse), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_corr_cache("CORR v2 12 0\n", &fine, &coarse), Err(Error::Parse { line: 1, .. })));
        let bad = format!("{head}0 1 0 0 0 0\n");
        assert!(matches!(parse_corr_cache(&bad, &fine, &coarse), Err(Error::Parse { line: 2, .. })));
        let bad = format!("{head}0 1 0 0 0 0 x\n");
        assert!(matches!(parse_corr_cache(&bad, &fine, &coarse), Err(Error::Parse { line: 2, .. })));
        let bad = format!("{head}999 1 0 0 0 0 0\n");
        assert!(matches!(parse_corr_cache(&bad, &fine, &coarse), Err(Error::Parse { line: 2, .. })));
        let short = format!("{head}0 1 0 0 0 0 0\n");
        assert!(matches!(parse_corr_cache(&short, &fine, &coarse), Err(Error::Parse { .. })));
    }
}
