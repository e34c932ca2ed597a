//! Thin wrapper over faer sparse direct solvers.

use crate::error::{Result, VemError};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

/// Square sparse matrix accumulated from (row, col, value) triplets; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletMatrix {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip).map_err(|e| VemError::Solver(format!("sparse assembly failed: {e:?}")))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Solve `A x = b`, trying sparse Cholesky first and falling back to LU.
    /// Fails if the relative residual exceeds `tol`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let a = self.to_faer()?;
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let mut x: Option<Vec<f64>> = None;
        if let Ok(llt) = a.sp_cholesky(Side::Lower) {
            let s = llt.solve(&rhs);
            x = Some((0..self.n).map(|i| s[i]).collect());
        }
        let accept = |x: &Vec<f64>| self.relative_residual(x, b) <= tol && x.iter().all(|v| v.is_finite());
        if !x.as_ref().is_some_and(accept) {
            let lu = a.sp_lu().map_err(|e| VemError::Solver(format!("sparse LU failed: {e:?}")))?;
            let s = lu.solve(&rhs);
            x = Some((0..self.n).map(|i| s[i]).collect());
        }
        let x = x.unwrap();
        let res = self.relative_residual(&x, b);
        if !(res <= tol) {
            return Err(VemError::Solver(format!("relative residual {res:.3e} above {tol:.1e}")));
        }
        Ok(x)
    }

    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Matrix Market coordinate dump (summed duplicates are not merged).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        s.push_str(&format!("{} {} {}\n", self.n, self.n, self.entries.len()));
        for &(i, j, v) in &self.entries {
            s.push_str(&format!("{} {} {:.17e}\n", i + 1, j + 1, v));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_and_indefinite_solves() {
        let mut a = TripletMatrix::new(3);
        for (i, j, v) in [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (2, 2, 0.5)] {
            a.push(i, j, v);
        }
        let x = a.solve(&[1.0, 2.0, 5.0], 1e-12).unwrap();
        assert!((x[2] - 2.0).abs() < 1e-14);
        let mut s = TripletMatrix::new(2);
        for (i, j, v) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)] {
            s.push(i, j, v);
        }
        let y = s.solve(&[3.0, 1.0], 1e-12).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 2.0).abs() < 1e-14);
    }
}
