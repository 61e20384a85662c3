//! Symmetric banded linear algebra for the elliptic boundary-value problems.
//!
//! Both model PDEs discretize to symmetric positive definite banded systems:
//! bandwidth 1 (tridiagonal) in 1-D and bandwidth m in 2-D. One direct
//! Cholesky factorization is computed per coefficient field and reused for
//! every right-hand side.

use crate::error::{Error, Result};

/// Symmetric banded matrix, lower-band storage.
///
/// `band[b]` holds the b-th subdiagonal (b = 0 is the main diagonal);
/// entry `band[b][i]` is A[i, i-b].
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    band: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> SymBanded {
        let band = (0..=bw).map(|b| vec![0.0; n.saturating_sub(b)]).collect();
        SymBanded { n, bw, band }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Add to A[i, j] and its mirror; requires i >= j and i - j <= bw.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.band[i - j][j] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            0.0
        } else {
            self.band[hi - lo][lo]
        }
    }

    /// y = A x for full symmetric A.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = self.band[0][i] * x[i];
            for b in 1..=self.bw {
                if i >= b {
                    acc += self.band[b][i - b] * x[i - b];
                }
                if i + b < self.n {
                    acc += self.band[b][i] * x[i + b];
                }
            }
            y[i] = acc;
        }
        y
    }

    /// Banded Cholesky factorization A = L Lᵀ. Fails with a condition
    /// diagnostic when a pivot is not safely positive.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.band.clone();
        let mut max_pivot = f64::MIN;
        for j in 0..n {
            let start = j.saturating_sub(bw);
            // diagonal
            let mut s = l[0][j];
            for k in start..j {
                let v = l[j - k][k];
                s -= v * v;
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::Solver(format!(
                    "non-positive pivot {s:.3e} at row {j} (largest pivot so far {max_pivot:.3e}); \
                     system is singular or indefinite"
                )));
            }
            let d = s.sqrt();
            max_pivot = max_pivot.max(d);
            l[0][j] = d;
            // column below the diagonal
            let end = (j + bw).min(n - 1);
            for i in (j + 1)..=end {
                let mut s = if i - j <= bw { l[i - j][j] } else { 0.0 };
                let kstart = start.max(i.saturating_sub(bw));
                for k in kstart..j {
                    s -= l[i - k][k] * l[j - k][k];
                }
                l[i - j][j] = s / d;
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// Lower Cholesky factor in banded storage.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<Vec<f64>>,
}

impl BandedCholesky {
    /// Solve A x = rhs using the stored factor.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        let mut x = rhs.to_vec();
        // forward: L y = rhs
        for i in 0..self.n {
            let start = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in start..i {
                s -= self.l[i - k][k] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
        // backward: Lᵀ x = y
        for i in (0..self.n).rev() {
            let end = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for k in (i + 1)..=end {
                s -= self.l[k - i][i] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SymBanded {
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn tridiagonal_solve_recovers_rhs() {
        let a = laplacian_1d(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let rhs = a.mul_vec(&x_true);
        let x = a.cholesky().unwrap().solve(&rhs);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-10);
        }
    }

    #[test]
    fn wide_band_solve() {
        // pentadiagonal SPD system
        let n = 40;
        let mut a = SymBanded::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i > 0 {
                a.add(i, i - 1, -2.0);
            }
            if i > 1 {
                a.add(i, i - 2, 0.5);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let rhs = a.mul_vec(&x_true);
        let x = a.cholesky().unwrap().solve(&rhs);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-11);
        }
    }

    #[test]
    fn indefinite_matrix_reports_solver_error() {
        let mut a = SymBanded::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(a.cholesky(), Err(Error::Solver(_))));
    }
}
