//! Symmetric tridiagonal systems, factored once and solved per time step.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[i]` on the main diagonal and
/// `off[i]` at positions `(i, i + 1)` and `(i + 1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal must have n - 1 entries");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n - 1 {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Off-diagonals non-positive and every row weakly diagonally dominant
    /// with at least one strictly dominant row.
    pub fn is_m_matrix(&self) -> bool {
        let n = self.len();
        if self.off.iter().any(|&o| o > 0.0) {
            return false;
        }
        let mut strict = false;
        for i in 0..n {
            let mut s = 0.0;
            if i > 0 {
                s += self.off[i - 1].abs();
            }
            if i + 1 < n {
                s += self.off[i].abs();
            }
            if self.diag[i] < s {
                return false;
            }
            if self.diag[i] > s {
                strict = true;
            }
        }
        strict
    }

    /// Thomas factorization. Fails on a non-positive or non-finite pivot.
    pub fn factor(&self) -> Result<TridiagFactor> {
        let n = self.len();
        let mut upper = vec![0.0; n.saturating_sub(1)];
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.off[i - 1] * upper[i - 1];
            }
            if !(pivot.is_finite() && pivot > 0.0) {
                return Err(Error::SolverBreakdown { row: i, pivot });
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                upper[i] = self.off[i] * inv_pivot[i];
            }
        }
        Ok(TridiagFactor { off: self.off.clone(), upper, inv_pivot })
    }
}

#[derive(Debug, Clone)]
pub struct TridiagFactor {
    off: Vec<f64>,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagFactor {
    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.inv_pivot.len());
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [4 -1 0; -1 4 -1; 0 -1 4] x = [3, 2, 3] -> x = [1, 1, 1]
        let a = SymTridiag::new(vec![4.0, 4.0, 4.0], vec![-1.0, -1.0]);
        let f = a.factor().unwrap();
        let mut b = vec![3.0, 2.0, 3.0];
        f.solve_in_place(&mut b);
        for v in b {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(a.is_m_matrix());
    }

    #[test]
    fn residual_is_small() {
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| 2.5 + (i as f64).sin()).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| -0.7 - 0.3 * (i as f64).cos().abs()).collect();
        let a = SymTridiag::new(diag, off);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let b = a.mul_vec(&x);
        let mut y = b.clone();
        a.factor().unwrap().solve_in_place(&mut y);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let a = SymTridiag::new(vec![1.0, 1.0], vec![2.0]);
        assert!(matches!(a.factor(), Err(Error::SolverBreakdown { row: 1, .. })));
        assert!(!a.is_m_matrix());
    }
}
