//! Screened ARAP pass at full resolution, pulling toward the reconstruction.

use std::collections::BTreeMap;

use crate::arap::{ArapSystem, Constraints};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::Vec3;

pub const DEFAULT_REFINE_ITERATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineParams {
    pub iterations: usize,
    /// Pull toward the reconstruction; `None` is `10 ×` the largest Laplacian diagonal.
    pub fit_weight: Option<f64>,
    /// Hard-pin the vertices passed as pins to their reconstructed positions.
    pub pin_handles: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { iterations: DEFAULT_REFINE_ITERATIONS, fit_weight: None, pin_handles: true }
    }
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub positions: Vec<Vec3>,
    /// ARAP energy plus fit penalty, before and after every iteration.
    pub objective_trace: Vec<f64>,
}

/// Holds the fine-mesh system so repeated refinements reuse its factorization.
#[derive(Debug)]
pub struct Refiner {
    system: ArapSystem,
}

impl Refiner {
    pub fn new(fine_rest: &Mesh) -> Result<Self> {
        Ok(Self { system: ArapSystem::new(fine_rest)? })
    }

    pub fn mesh(&self) -> &Mesh {
        self.system.mesh()
    }

    pub fn refine(&mut self, reconstructed: &[Vec3], params: &RefineParams, pins: &[usize]) -> Result<Refined> {
        let n = self.system.mesh().vertex_count();
        if reconstructed.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: reconstructed.len() });
        }
        if params.iterations == 0 {
            return Ok(Refined { positions: reconstructed.to_vec(), objective_trace: Vec::new() });
        }
        let handles: BTreeMap<usize, Vec3> = reconstructed.iter().copied().enumerate().collect();
        let mut c = Constraints::soft(handles, params.fit_weight);
        if params.pin_handles {
            for &p in pins {
                if p >= n {
                    return Err(Error::IndexOutOfRange { index: p, len: n });
                }
                c.pins.insert(p, reconstructed[p]);
            }
        }
        let sol = self.system.solve(&c, params.iterations, Some(reconstructed))?;
        Ok(Refined { positions: sol.positions, objective_trace: sol.energy_trace })
    }
}

/// One-shot refinement of `reconstructed` against the rest shape `fine_rest`.
pub fn refine(fine_rest: &Mesh, reconstructed: &[Vec3], params: &RefineParams, pins: &[usize]) -> Result<Vec<Vec3>> {
    if reconstructed.len() != fine_rest.vertex_count() {
        return Err(Error::SizeMismatch { expected: fine_rest.vertex_count(), found: reconstructed.len() });
    }
    if params.iterations == 0 {
        return Ok(reconstructed.to_vec());
    }
    Ok(Refiner::new(fine_rest)?.refine(reconstructed, params, pins)?.positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::edge_error;
    use crate::synth;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_iterations_is_identity() {
        let m = synth::torus(10, 6).unwrap();
        let p: Vec<Vec3> = m.positions().iter().map(|p| p * 1.3 + Vec3::x()).collect();
        let params = RefineParams { iterations: 0, ..Default::default() };
        assert_eq!(refine(&m, &p, &params, &[]).unwrap(), p);
    }

    #[test]
    fn rigid_reconstruction_is_fixed() {
        let m = synth::bar(2, 2, 8, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut refiner = Refiner::new(&m).unwrap();
        let tol = 1e-7 * m.bbox_diagonal();
        for _ in 0..5 {
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(-3.0..3.0));
            let t = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let moved: Vec<Vec3> = m.positions().iter().map(|p| r * p + t).collect();
            let out = refiner.refine(&moved, &RefineParams::default(), &[0, 5]).unwrap();
            for (a, b) in out.positions.iter().zip(&moved) {
                assert!((a - b).norm() <= tol);
            }
        }
    }

    #[test]
    fn displaced_vertex_is_pulled_back() {
        let m = synth::icosphere(3).unwrap();
        let mut p = m.positions().to_vec();
        let h = 0.5 * m.mean_edge_length();
        let dir = p[100].normalize();
        p[100] += dir * h;
        let before = edge_error(&m, &p).unwrap().summary.mean;
        let out = refine(&m, &p, &RefineParams::default(), &[]).unwrap();
        let after = edge_error(&m, &out).unwrap().summary.mean;
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn objective_is_monotone() {
        let m = synth::bar(3, 3, 12, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<Vec3> = m
            .positions()
            .iter()
            .map(|p| {
                let a = 0.1 * p.z;
                Vec3::new(p.x * a.cos() - p.y * a.sin(), p.x * a.sin() + p.y * a.cos(), p.z)
                    + Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
            })
            .collect();
        let params = RefineParams { iterations: 10, ..Default::default() };
        let out = Refiner::new(&m).unwrap().refine(&p, &params, &[]).unwrap();
        assert_eq!(out.objective_trace.len(), 11);
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn pins_hold_exactly() {
        let m = synth::icosphere(2).unwrap();
        let p: Vec<Vec3> = m.positions().iter().map(|p| p * 1.2).collect();
        let out = refine(&m, &p, &RefineParams::default(), &[3, 7]).unwrap();
        assert_eq!(out[3], p[3]);
        assert_eq!(out[7], p[7]);
        let unpinned = RefineParams { pin_handles: false, ..Default::default() };
        let free = refine(&m, &p, &unpinned, &[3, 7]).unwrap();
        assert_ne!(free[3], p[3]);
    }

    #[test]
    fn size_mismatch() {
        let m = synth::icosphere(1).unwrap();
        assert!(matches!(
            refine(&m, &m.positions()[1..], &RefineParams::default(), &[]),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
