//! Thin wrapper over faer's supernodal sparse Cholesky.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::Vec3;

/// Lower-triangle triplets of a symmetric matrix; duplicates are summed.
#[derive(Debug, Default, Clone)]
pub struct SymmetricBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl SymmetricBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        Self { n, entries: Vec::with_capacity(nnz) }
    }

    /// Adds `value` at (row, col) and, implicitly, at (col, row).
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        self.entries.push(Triplet::new(r, c, value));
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite;

/// A factorised symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    llt: Option<faer::sparse::linalg::solvers::Llt<usize, f64>>,
}

impl SpdFactor {
    pub fn factorize(builder: &SymmetricBuilder) -> Result<Self, NotPositiveDefinite> {
        let n = builder.n;
        if n == 0 {
            return Ok(Self { n, llt: None });
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &builder.entries)
            .map_err(|_| NotPositiveDefinite)?;
        let llt = mat.sp_cholesky(Side::Lower).map_err(|_| NotPositiveDefinite)?;
        Ok(Self { n, llt: Some(llt) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves for the three coordinate right-hand sides at once, in place.
    pub fn solve_in_place(&self, rhs: &mut [Vec3]) {
        assert_eq!(rhs.len(), self.n);
        let Some(llt) = &self.llt else { return };
        let mut m = Mat::<f64>::from_fn(self.n, 3, |i, j| rhs[i][j]);
        llt.solve_in_place(m.as_mut());
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = Vec3::new(m[(i, 0)], m[(i, 1)], m[(i, 2)]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // [4 1 0; 1 3 1; 0 1 2]
        let mut b = SymmetricBuilder::new(3);
        b.add(0, 0, 4.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 2.0);
        b.add(1, 1, 1.0);
        b.add(1, 2, 1.0);
        b.add(2, 2, 2.0);
        let f = SpdFactor::factorize(&b).unwrap();
        let x = [Vec3::new(1.0, 2.0, -1.0), Vec3::new(0.5, 0.0, 3.0), Vec3::new(-2.0, 1.0, 0.0)];
        let mut rhs = vec![
            4.0 * x[0] + x[1],
            x[0] + 3.0 * x[1] + x[2],
            x[1] + 2.0 * x[2],
        ];
        f.solve_in_place(&mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut b = SymmetricBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(1, 0, 2.0);
        b.add(1, 1, 1.0);
        assert!(SpdFactor::factorize(&b).is_err());
    }
}
